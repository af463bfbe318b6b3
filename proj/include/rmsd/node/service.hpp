#pragma once

// One ledger node: consensus event loop, TCP transport, on-disk state,
// privacy store, and the HTTP/JSON API.
//
// Threading: the consensus core lives on a single loop thread. HTTP workers
// post tasks to it and read immutable committed snapshots directly.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "rmsd/consensus/raft_core.hpp"
#include "rmsd/consensus/static_nodes.hpp"
#include "rmsd/node/api.hpp"
#include "rmsd/node/transport.hpp"
#include "rmsd/privacy/store.hpp"

namespace httplib {
class Server;
}

namespace rmsd::node {

// Files inside a data directory.
inline constexpr const char* kNodeKeyFile = "node.key";
inline constexpr const char* kServiceKeyFile = "service.key";
inline constexpr const char* kGenesisFile = "genesis.block";
inline constexpr const char* kStaticNodesFile = "static-nodes.json";
inline constexpr const char* kRaftMetaFile = "raft-meta.json";
inline constexpr const char* kRaftLogFile = "raft-log.jsonl";

/// Key files hold the 32-byte seed as hex plus a newline.
void write_key_file(const std::filesystem::path& path, const KeyPair& key);
KeyPair read_key_file(const std::filesystem::path& path);

void write_genesis_file(const std::filesystem::path& path, const Block& genesis);
Block read_genesis_file(const std::filesystem::path& path);

/// The admin granted by the genesis block's self-grant.
std::optional<Account> genesis_admin(const Block& genesis);

struct NodeConfig {
  std::filesystem::path data_dir;
  /// Defaults to data_dir/static-nodes.json.
  std::optional<std::filesystem::path> static_nodes;
  HostPort listen{"127.0.0.1", 8545};
  HostPort raft_listen{"127.0.0.1", 50400};
  /// When set, startup fails unless the genesis admin matches.
  std::optional<Account> genesis_admin;
  std::uint64_t seed = 0;
  /// Applications must arrive as applicant-signed transactions.
  bool require_applicant_auth = false;
  consensus::Timing timing{};
  /// How long writes wait for a leader before answering NoQuorum.
  std::uint64_t quorum_timeout_ms = 5000;
  /// How long an add-peer request waits for its config block.
  std::uint64_t add_peer_timeout_ms = 10000;
  std::size_t http_threads = 8;
  std::function<void(const std::string&)> log;
};

/// Immutable view of the committed chain, swapped in after each commit.
struct Snapshot {
  std::uint64_t height = 0;
  Digest tip;
  Digest state_digest;
  contract::ContractState state;
  std::vector<NodeId> members;
  std::shared_ptr<const std::vector<Block>> blocks;
  std::shared_ptr<const std::map<Digest, std::uint64_t>> tx_heights;
};

class NodeService {
 public:
  explicit NodeService(NodeConfig config);
  ~NodeService();
  NodeService(const NodeService&) = delete;
  NodeService& operator=(const NodeService&) = delete;

  /// Binds both listeners and starts the loop. Throws on bind failure.
  void start();
  void stop();

  std::shared_ptr<const Snapshot> snapshot() const;
  const NodeId& self() const { return self_; }
  const PublicKey& service_account() const { return service_key_.public_key(); }
  std::uint16_t http_port() const { return http_port_; }
  privacy::PrivacyStore& privacy() { return *privacy_; }

  struct Status {
    consensus::NodeRole role;
    std::uint64_t term;
    std::optional<PublicKey> leader;
    bool quorum;
  };
  Status status();

 private:
  struct PeerWaiter;

  void run_loop();
  void post(std::function<void()> task);
  template <typename F>
  auto call(F&& f) -> decltype(f());
  std::uint64_t now_ms() const;

  void handle_output(consensus::Output out);
  void persist(const consensus::Output& out);
  void publish_snapshot();
  void install_routes();
  bool wait_for_quorum();

  struct SubmitResult {
    api::Receipt receipt;
    bool no_quorum = false;
  };
  SubmitResult submit_tx(const Transaction& tx, std::optional<Digest> personal_ref);

  NodeConfig config_;
  std::filesystem::path static_nodes_path_;
  KeyPair node_key_;
  KeyPair service_key_;
  NodeId self_;
  Block genesis_;
  std::uint64_t clock_offset_ = 0;

  std::unique_ptr<consensus::RaftCore> core_;
  std::unique_ptr<TcpTransport> transport_;
  std::unique_ptr<privacy::PrivacyStore> privacy_;
  std::unique_ptr<httplib::Server> http_;
  std::uint16_t http_port_ = 0;
  std::thread http_thread_;

  std::thread loop_thread_;
  std::atomic<bool> running_{false};
  std::mutex task_mutex_;
  std::condition_variable task_cv_;
  std::deque<std::function<void()>> tasks_;

  // Loop-thread only.
  std::size_t persisted_entries_ = 0;  // log entries on disk
  std::vector<NodeId> directory_;
  std::vector<Block> committed_blocks_;
  std::map<Digest, std::uint64_t> committed_tx_heights_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;

  std::mutex receipts_mutex_;
  std::map<Digest, api::Receipt> receipts_;
  std::map<PublicKey, std::shared_ptr<PeerWaiter>> peer_waiters_;
};

}  // namespace rmsd::node
