#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "rmsd/consensus/static_nodes.hpp"
#include "rmsd/node/service.hpp"

using namespace rmsd;

namespace {

std::optional<NodeId> find_self(const node::NodeConfig& cfg) {
  auto key = node::read_key_file(cfg.data_dir / node::kNodeKeyFile).public_key();
  std::vector<NodeId> known;
  auto genesis = node::read_genesis_file(cfg.data_dir / node::kGenesisFile);
  if (genesis.config) known = genesis.config->nodes;
  auto path = cfg.static_nodes.value_or(cfg.data_dir / node::kStaticNodesFile);
  if (std::filesystem::exists(path))
    if (auto sn = consensus::load_static_nodes(path.string()))
      known.insert(known.end(), sn->nodes.begin(), sn->nodes.end());
  for (const auto& n : known)
    if (n.pubkey == key) return n;
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rmsd-node: ledger node with consensus and HTTP API"};
  std::string data_dir, static_nodes, listen, raft_listen, admin_hex;
  std::uint64_t seed = 0, quorum_timeout = 5000;
  bool require_auth = false, quiet = false;
  app.add_option("--data-dir", data_dir, "Node data directory")->required();
  app.add_option("--static-nodes", static_nodes, "static-nodes.json (default: <data-dir>/static-nodes.json)");
  app.add_option("--listen", listen, "HTTP address host:port (default: from static nodes)");
  app.add_option("--raft-listen", raft_listen, "Consensus address host:port (default: from static nodes)");
  app.add_option("--genesis-admin", admin_hex, "Refuse to start unless genesis names this admin");
  app.add_option("--seed", seed, "Seed for election timer randomness");
  app.add_option("--quorum-timeout-ms", quorum_timeout, "Wait for a leader before NoQuorum");
  app.add_flag("--require-applicant-auth", require_auth,
               "Only accept applications signed by the applicant");
  app.add_flag("--quiet", quiet, "No progress logging");
  CLI11_PARSE(app, argc, argv);

  node::NodeConfig cfg;
  cfg.data_dir = data_dir;
  if (!static_nodes.empty()) cfg.static_nodes = static_nodes;
  cfg.seed = seed;
  cfg.quorum_timeout_ms = quorum_timeout;
  cfg.require_applicant_auth = require_auth;
  if (!quiet) cfg.log = [](const std::string& line) { std::cerr << "rmsd-node: " << line << "\n"; };

  try {
    auto self = find_self(cfg);
    auto pick = [&](const std::string& flag, const std::string& value,
                    std::uint16_t fallback) -> node::HostPort {
      if (!value.empty()) {
        auto hp = node::parse_host_port(value);
        if (!hp) throw std::runtime_error("bad " + flag + " address: " + value);
        return *hp;
      }
      if (!self) throw std::runtime_error(flag + " is required for a node missing from static nodes");
      return {self->host, fallback};
    };
    cfg.listen = pick("--listen", listen, self ? self->port : 0);
    cfg.raft_listen = pick("--raft-listen", raft_listen, self ? self->raftport : 0);
    if (!admin_hex.empty()) {
      auto admin = fixed_from_hex<32>(admin_hex);
      if (!admin) throw std::runtime_error("--genesis-admin must be 64 hex chars");
      cfg.genesis_admin = *admin;
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    node::NodeService service(cfg);
    service.start();
    std::cerr << "rmsd-node: " << render_node_uri(service.self()) << " http=" << cfg.listen.host
              << ":" << service.http_port() << "\n";
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "rmsd-node: shutting down\n";
    service.stop();
  } catch (const std::exception& e) {
    std::cerr << "rmsd-node: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
