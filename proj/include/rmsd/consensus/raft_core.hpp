#pragma once

// Single-threaded, deterministic RAFT core replicating whole blocks.
//
// The core owns no I/O and no clock: every input carries the caller's
// logical time in milliseconds and every effect comes back in an Output.
// The same core runs inside the TCP node service and the simulator.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <variant>
#include <vector>

#include "rmsd/consensus/messages.hpp"
#include "rmsd/ledger.hpp"

namespace rmsd::consensus {

enum class NodeRole : std::uint8_t { Follower, Candidate, Leader };
std::string_view node_role_name(NodeRole r);

struct Timing {
  std::uint64_t election_timeout_min = 150;
  std::uint64_t election_timeout_max = 300;
  std::uint64_t heartbeat_interval = 50;
  /// How often a tracked client transaction or peer request is re-sent to the leader.
  std::uint64_t retry_interval = 400;
  std::uint64_t max_entries_per_message = 64;
  /// Future-nonce transactions older than this are dropped from the pool.
  std::uint64_t pool_expiry = 60'000;
  /// Added to logical time to produce block timestamps (ms since epoch).
  std::uint64_t epoch_offset = 0;
};

/// State that must survive a restart.
struct PersistentState {
  std::uint64_t current_term = 0;
  std::optional<PublicKey> voted_for;
  std::vector<LogEntry> log;  // log[0] is genesis
  std::uint64_t commit_index = 0;

  bool operator==(const PersistentState&) const = default;
};

struct BecameCandidate {
  std::uint64_t term;
};
struct BecameLeader {
  std::uint64_t term;
};
struct BecameFollower {
  std::uint64_t term;
};
struct BlockCommitted {
  std::uint64_t height;
  Digest state_digest;  // contract state after applying the block
};
struct EntryAppended {
  std::uint64_t height;
  std::uint64_t term;
  Digest hash;
};
/// Log entries at heights >= from were discarded.
struct EntriesTruncated {
  std::uint64_t from;
};
using CoreEvent = std::variant<BecameCandidate, BecameLeader, BecameFollower, BlockCommitted,
                               EntryAppended, EntriesTruncated>;

struct Output {
  /// Unsigned; the transport signs on the way out.
  std::vector<Envelope> messages;
  /// Newly committed blocks, in height order, each handed out exactly once.
  std::vector<Block> committed;
  /// Final rejections of transactions submitted through this node.
  std::vector<TxRejected::Item> rejected;
  /// Final rejections of add-peer requests submitted through this node.
  std::vector<AddPeerRejected> add_peer_rejected;
  std::vector<CoreEvent> events;
  /// Persistent state changed and should be flushed before messages are sent.
  bool persist = false;

  void merge(Output&& other);
};

struct NotLeader {
  std::optional<PublicKey> leader_hint;
};

enum class AddPeerError : std::uint8_t { DuplicatePeer, NotLeader, ChangeInProgress };
std::string_view add_peer_error_name(AddPeerError e);

class RaftCore {
 public:
  /// Fresh node whose log holds only the shared genesis block.
  RaftCore(NodeId self, const Block& genesis, Timing timing, std::uint64_t seed,
           std::uint64_t now);
  /// Restart from persisted state. Throws std::invalid_argument if the log is invalid.
  RaftCore(NodeId self, PersistentState persisted, Timing timing, std::uint64_t seed,
           std::uint64_t now);

  // Event-loop inputs.
  Output tick(std::uint64_t now);
  Output receive(const Envelope& env, std::uint64_t now);
  /// Client transaction entering through this node. Rejections that are
  /// known immediately (bad signature, replayed nonce) are reported in the Output.
  Output submit(const Transaction& tx, std::uint64_t now);
  /// Asks the cluster to admit `node`; forwarded to the leader when necessary.
  Output request_add_peer(const NodeId& node, std::uint64_t now);

  // Protocol steps. Public so tests can drive them directly.
  void handle_timeout(std::uint64_t now, Output& out);
  VoteResponse handle_vote_request(const VoteRequest& req, std::uint64_t now, Output& out);
  void handle_vote_response(const PublicKey& from, const VoteResponse& resp, std::uint64_t now,
                            Output& out);
  /// Builds one block from the ready part of the pool and broadcasts it.
  /// With nothing ready no block is built (heartbeats carry liveness).
  std::optional<NotLeader> propose_block(std::uint64_t now, Output& out);
  AppendResponse handle_append_entries(const AppendEntries& msg, std::uint64_t now, Output& out);
  void handle_append_response(const PublicKey& from, const AppendResponse& resp,
                              std::uint64_t now, Output& out);
  void advance_commit(Output& out);
  std::optional<AddPeerError> add_peer(const NodeId& node, std::uint64_t now, Output& out);

  // Queries.
  const NodeId& self() const { return self_; }
  NodeRole role() const { return role_; }
  std::uint64_t current_term() const { return term_; }
  const std::optional<PublicKey>& voted_for() const { return voted_for_; }
  std::uint64_t commit_index() const { return commit_index_; }
  std::uint64_t last_height() const { return tip_.chain().height(); }
  std::uint64_t last_term() const { return terms_.back(); }
  std::uint64_t term_at(std::uint64_t height) const { return terms_.at(height); }
  const std::optional<PublicKey>& leader_hint() const { return leader_hint_; }
  /// Whole log including the uncommitted suffix, with state and members at its tip.
  const ledger::Ledger& tip() const { return tip_; }
  /// Committed prefix, state, and membership.
  const ledger::Ledger& committed() const { return committed_; }
  /// Current configuration (latest config block in the log, committed or not).
  const std::vector<NodeId>& members() const { return tip_.members(); }
  bool is_member() const;
  std::size_t quorum() const { return members().size() / 2 + 1; }
  /// Leader: heard from a majority within the last max election timeout.
  /// Follower: heard from a leader within that window.
  bool has_quorum_contact(std::uint64_t now) const;
  /// Nonce the next transaction from `account` should carry, counting the
  /// committed chain, the uncommitted log, and transactions queued here.
  std::uint64_t suggested_nonce(const Account& account) const;
  std::size_t pool_size() const { return pool_.size(); }
  PersistentState persistent_state() const;

 private:
  struct PoolEntry {
    Transaction tx;
    PublicKey origin;
    std::uint64_t received_at;
  };
  struct Tracked {
    Transaction tx;
    std::uint64_t last_attempt;
  };
  struct TrackedPeer {
    NodeId node;
    std::uint64_t last_attempt;
  };
  struct Progress {
    std::uint64_t next_height = 1;
    std::uint64_t match_height = 0;
    std::uint64_t last_ack = 0;
  };

  void init_from_log(std::vector<LogEntry> log, std::uint64_t commit_index);
  void reset_election_timer(std::uint64_t now);
  void become_follower(std::uint64_t term, Output& out);
  void become_leader(std::uint64_t now, Output& out);
  void step_down_if_newer(std::uint64_t term, Output& out);
  void send(const PublicKey& to, Message msg, Output& out) const;
  void broadcast_append(std::uint64_t now, Output& out);
  void send_append(const PublicKey& peer, Output& out);
  bool append_entry(std::uint64_t term, const Block& block, Output& out);
  void truncate_from(std::uint64_t height, Output& out);
  void apply_commits(std::uint64_t new_commit, Output& out);
  Block build_block(std::vector<Transaction> txs, std::optional<ConfigChange> config,
                    std::uint64_t now) const;
  void admit_to_pool(const Transaction& tx, const PublicKey& origin, std::uint64_t now,
                     Output& out);
  void reject(const PublicKey& origin, const Digest& tx_id, ledger::TxError reason, Output& out);
  void retry_tracked(std::uint64_t now, Output& out);
  void check_quorum(std::uint64_t now, Output& out);
  std::uint64_t random_timeout();

  NodeId self_;
  Timing timing_;
  std::mt19937_64 rng_;

  // Persistent.
  std::uint64_t term_ = 0;
  std::optional<PublicKey> voted_for_;
  ledger::Ledger tip_;
  std::vector<std::uint64_t> terms_;  // term of each log entry, by height
  std::uint64_t commit_index_ = 0;

  // Volatile.
  ledger::Ledger committed_;
  std::map<Digest, std::uint64_t> tx_heights_;  // tx_id -> height in the log
  NodeRole role_ = NodeRole::Follower;
  std::optional<PublicKey> leader_hint_;
  std::uint64_t election_deadline_ = 0;
  std::uint64_t last_leader_contact_ = 0;
  bool heard_from_leader_ = false;
  std::uint64_t next_heartbeat_ = 0;
  std::set<PublicKey> votes_;
  std::map<PublicKey, Progress> progress_;
  std::uint64_t leader_since_ = 0;

  std::vector<PoolEntry> pool_;
  std::set<Digest> pool_ids_;
  std::map<Digest, Tracked> tracked_;
  std::map<PublicKey, TrackedPeer> tracked_peers_;
};

}  // namespace rmsd::consensus
