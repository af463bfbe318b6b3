#pragma once

// Deterministic discrete-event simulator: N consensus cores, a virtual clock,
// and a lossy, partitionable network. Same config, same trace, byte for byte.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rmsd/consensus/raft_core.hpp"

namespace rmsd::sim {

enum class FaultKind : std::uint8_t { Partition, Heal, Crash, Restart, Drop };

struct Fault {
  std::uint64_t time = 0;
  FaultKind kind = FaultKind::Heal;
  std::vector<std::size_t> side_a, side_b;  // Partition
  std::size_t node = 0;                     // Crash, Restart
  double probability = 0;                   // Drop
  std::uint64_t duration = 0;               // Drop
};

enum class OpKind : std::uint8_t { SetUser, CreateNeed, CreateSupport, ApproveNeed, ApproveSupport };

/// One client action. Actors are named; keys derive from the name, and
/// "admin" is the genesis administrator.
struct WorkloadOp {
  std::uint64_t time = 0;
  std::size_t node = 0;  // entry node; the client falls over to the next live one
  std::string actor;
  OpKind op = OpKind::CreateNeed;
  std::optional<std::uint64_t> nonce;  // assigned per actor in order when absent
  std::string target;                  // SetUser: actor name
  Role role = Role::None;              // SetUser
  std::string kind, unit, shipping;    // creations
  std::uint64_t amount = 0;
  std::uint64_t id = 0;                // approvals
  /// Indices of ops that must be committed at the entry node first.
  std::vector<std::size_t> after;
};

struct SimConfig {
  std::size_t nodes = 3;
  std::uint64_t seed = 0;
  std::uint64_t latency_min = 1;
  std::uint64_t latency_max = 10;
  std::vector<Fault> faults;
  std::vector<WorkloadOp> workload;
  std::uint64_t time_cap = 60'000;
  /// Sign and verify every envelope, as the real transport does.
  bool sign_messages = false;
  /// Record every send and delivery in the trace.
  bool record_messages = true;
  consensus::Timing timing{};
};

struct Trace {
  std::vector<nlohmann::json> events;

  std::string to_jsonl() const;
  static Trace from_jsonl(std::string_view text);
};

struct SimResult {
  Trace trace;
  bool quiescent = false;
  bool time_cap_exceeded = false;
  std::uint64_t end_time = 0;
  /// Time of the last scheduled fault (0 if none).
  std::uint64_t last_fault_time = 0;
  /// First time every workload op was committed on every live node.
  std::optional<std::uint64_t> completed_at;
  std::size_t rejected_ops = 0;
  /// Committed chain tip and state digest per node (absent for crashed nodes).
  std::vector<std::optional<Digest>> final_tips;
  std::vector<std::optional<Digest>> final_digests;
  std::vector<Block> committed_chain;  // longest committed chain seen at the end
};

SimResult run_sim(const SimConfig& config);

enum class Property : std::uint8_t {
  ElectionSafety,
  LogMatching,
  LeaderCompleteness,
  StateMachineSafety,
  PrivacySeparation,
};
std::string_view property_name(Property p);
inline constexpr Property kAllProperties[] = {
    Property::ElectionSafety, Property::LogMatching, Property::LeaderCompleteness,
    Property::StateMachineSafety, Property::PrivacySeparation};

struct TraceViolation {
  Property property;
  std::size_t event_index;
  std::string detail;
};

/// First violation among `properties`, or nullopt if the trace is clean.
std::optional<TraceViolation> check_trace(const Trace& trace,
                                          std::span<const Property> properties = kAllProperties);

/// After the last fault heals, did the cluster finish the workload within `bound` ms?
bool liveness_ok(const SimResult& result, std::uint64_t bound);

// Scenario helpers shared by the CLI, tests, and the acceptance runner.
KeyPair actor_key(const std::string& name);
NodeId sim_node_id(std::size_t index);
KeyPair sim_node_key(std::size_t index);
Block sim_genesis(std::size_t nodes);

/// Grant a checker, create a need, approve it (grant and create share a block).
std::vector<WorkloadOp> need_flow_workload(std::uint64_t start = 1000, std::size_t entry_node = 1);
/// Need flow plus supports with shipping and extra creations, spread over time.
std::vector<WorkloadOp> mixed_workload(std::uint64_t seed, std::size_t entry_nodes);
/// Partitions, crash/restart pairs and drop windows (p <= 0.3), all healed by the end.
std::vector<Fault> random_faults(std::uint64_t seed, std::size_t nodes);

std::vector<Fault> faults_from_json(const nlohmann::json& j);
nlohmann::json faults_to_json(const std::vector<Fault>& faults);
std::vector<WorkloadOp> workload_from_json(const nlohmann::json& j);
nlohmann::json workload_to_json(const std::vector<WorkloadOp>& ops);

}  // namespace rmsd::sim
