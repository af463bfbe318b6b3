#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rmsd/sim/sim.hpp"

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic consensus simulator"};
  rmsd::sim::SimConfig cfg;
  std::string faults_path, workload_path, out_path;
  bool random_faults = false, mixed = false, sign = false;
  std::uint64_t liveness_bound = 3000;
  app.add_option("--nodes", cfg.nodes, "Number of nodes")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "Simulation seed");
  app.add_option("--faults", faults_path, "Fault schedule (JSON array)");
  app.add_flag("--random-faults", random_faults, "Generate a fault schedule from the seed");
  app.add_option("--workload", workload_path, "Client workload (JSON array); default: need flow");
  app.add_flag("--mixed-workload", mixed, "Generate a mixed workload from the seed");
  app.add_option("--out", out_path, "Write the trace as JSON lines");
  app.add_option("--time-cap", cfg.time_cap, "Logical time cap in ms");
  app.add_option("--latency-min", cfg.latency_min);
  app.add_option("--latency-max", cfg.latency_max);
  app.add_flag("--sign", sign, "Sign and verify every message");
  app.add_option("--liveness-bound", liveness_bound,
                 "Max ms from last fault to workload completion");
  CLI11_PARSE(app, argc, argv);

  try {
    cfg.sign_messages = sign;
    if (!faults_path.empty()) cfg.faults = rmsd::sim::faults_from_json(read_json(faults_path));
    else if (random_faults) cfg.faults = rmsd::sim::random_faults(cfg.seed, cfg.nodes);
    if (!workload_path.empty())
      cfg.workload = rmsd::sim::workload_from_json(read_json(workload_path));
    else if (mixed)
      cfg.workload = rmsd::sim::mixed_workload(cfg.seed, cfg.nodes);
    else
      cfg.workload = rmsd::sim::need_flow_workload(1000, cfg.nodes > 1 ? 1 : 0);

    auto result = rmsd::sim::run_sim(cfg);
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::binary);
      out << result.trace.to_jsonl();
      if (!out) throw std::runtime_error("cannot write " + out_path);
    }
    auto violation = rmsd::sim::check_trace(result.trace);
    bool live = rmsd::sim::liveness_ok(result, liveness_bound);
    std::cout << "events=" << result.trace.events.size() << " end=" << result.end_time
              << " quiescent=" << (result.quiescent ? "yes" : "no")
              << " committed_height=" << (result.committed_chain.empty() ? 0 : result.committed_chain.back().height)
              << " rejected=" << result.rejected_ops << " liveness=" << (live ? "ok" : "missed")
              << "\n";
    if (violation) {
      std::cout << "VIOLATION " << rmsd::sim::property_name(violation->property) << " at event "
                << violation->event_index << ": " << violation->detail << "\n";
      return 1;
    }
    if (result.time_cap_exceeded) std::cout << "TimeCapExceeded\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "rmsd-sim: " << e.what() << "\n";
    return 2;
  }
}
