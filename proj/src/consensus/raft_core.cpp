#include "rmsd/consensus/raft_core.hpp"

#include <algorithm>
#include <stdexcept>

namespace rmsd::consensus {

std::string_view node_role_name(NodeRole r) {
  switch (r) {
    case NodeRole::Follower: return "follower";
    case NodeRole::Candidate: return "candidate";
    case NodeRole::Leader: return "leader";
  }
  return "unknown";
}

std::string_view add_peer_error_name(AddPeerError e) {
  switch (e) {
    case AddPeerError::DuplicatePeer: return "DuplicatePeer";
    case AddPeerError::NotLeader: return "NotLeader";
    case AddPeerError::ChangeInProgress: return "ChangeInProgress";
  }
  return "Unknown";
}

void Output::merge(Output&& other) {
  auto append = [](auto& dst, auto& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
  };
  append(messages, other.messages);
  append(committed, other.committed);
  append(rejected, other.rejected);
  append(add_peer_rejected, other.add_peer_rejected);
  append(events, other.events);
  persist = persist || other.persist;
}

RaftCore::RaftCore(NodeId self, const Block& genesis, Timing timing, std::uint64_t seed,
                   std::uint64_t now)
    : self_(std::move(self)), timing_(timing), rng_(seed) {
  init_from_log({LogEntry{0, genesis}}, 0);
  reset_election_timer(now);
}

RaftCore::RaftCore(NodeId self, PersistentState persisted, Timing timing, std::uint64_t seed,
                   std::uint64_t now)
    : self_(std::move(self)), timing_(timing), rng_(seed) {
  term_ = persisted.current_term;
  voted_for_ = persisted.voted_for;
  init_from_log(std::move(persisted.log), persisted.commit_index);
  reset_election_timer(now);
}

void RaftCore::init_from_log(std::vector<LogEntry> log, std::uint64_t commit_index) {
  if (log.empty()) throw std::invalid_argument("log must contain the genesis block");
  if (commit_index >= log.size()) throw std::invalid_argument("commit index beyond log");
  tip_ = ledger::Ledger{};
  committed_ = ledger::Ledger{};
  terms_.clear();
  tx_heights_.clear();
  for (auto& entry : log) {
    if (!terms_.empty() && entry.term < terms_.back())
      throw std::invalid_argument("log terms must not decrease");
    if (auto err = tip_.append(entry.block))
      throw std::invalid_argument("invalid log entry: " + err->describe());
    terms_.push_back(entry.term);
    for (const auto& tx : entry.block.transactions) tx_heights_[tx.tx_id] = entry.block.height;
    if (entry.block.height <= commit_index) committed_.append(entry.block);
  }
  commit_index_ = commit_index;
}

std::uint64_t RaftCore::random_timeout() {
  auto span = timing_.election_timeout_max - timing_.election_timeout_min + 1;
  return timing_.election_timeout_min + rng_() % span;
}

void RaftCore::reset_election_timer(std::uint64_t now) {
  election_deadline_ = now + random_timeout();
}

bool RaftCore::is_member() const {
  const auto& m = members();
  return std::any_of(m.begin(), m.end(), [&](const NodeId& n) { return n.pubkey == self_.pubkey; });
}

void RaftCore::send(const PublicKey& to, Message msg, Output& out) const {
  out.messages.push_back(Envelope{self_.pubkey, to, std::move(msg), {}});
}

// ---------------------------------------------------------------------------
// Inputs

Output RaftCore::tick(std::uint64_t now) {
  Output out;
  if (role_ == NodeRole::Leader) {
    check_quorum(now, out);
  }
  if (role_ == NodeRole::Leader) {
    if (now >= next_heartbeat_) {
      propose_block(now, out);
      broadcast_append(now, out);
      next_heartbeat_ = now + timing_.heartbeat_interval;
    }
  } else if (now >= election_deadline_) {
    handle_timeout(now, out);
  }
  retry_tracked(now, out);
  return out;
}

Output RaftCore::receive(const Envelope& env, std::uint64_t now) {
  Output out;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, VoteRequest>) {
          if (m.candidate != env.from) return;
          auto resp = handle_vote_request(m, now, out);
          send(env.from, resp, out);
        } else if constexpr (std::is_same_v<M, VoteResponse>) {
          handle_vote_response(env.from, m, now, out);
        } else if constexpr (std::is_same_v<M, AppendEntries>) {
          if (m.leader != env.from) return;
          auto resp = handle_append_entries(m, now, out);
          send(env.from, resp, out);
        } else if constexpr (std::is_same_v<M, AppendResponse>) {
          handle_append_response(env.from, m, now, out);
        } else if constexpr (std::is_same_v<M, ForwardTransactions>) {
          if (role_ != NodeRole::Leader) return;  // origin retries against its new hint
          for (const auto& tx : m.txs) admit_to_pool(tx, env.from, now, out);
        } else if constexpr (std::is_same_v<M, TxRejected>) {
          for (const auto& item : m.items) {
            if (tracked_.erase(item.tx_id) > 0) out.rejected.push_back(item);
          }
        } else if constexpr (std::is_same_v<M, ForwardAddPeer>) {
          if (role_ != NodeRole::Leader) return;
          // Duplicates and in-progress changes are left for the origin's retry,
          // which resolves once it sees the config block commit.
          add_peer(m.node, now, out);
        } else if constexpr (std::is_same_v<M, AddPeerRejected>) {
          if (tracked_peers_.erase(m.node) > 0) out.add_peer_rejected.push_back(m);
        }
      },
      env.msg);
  return out;
}

Output RaftCore::submit(const Transaction& tx, std::uint64_t now) {
  Output out;
  auto body = encode_tx_body(tx.sender, tx.nonce, tx.payload);
  if (!verify_signature(tx.sender, body, tx.signature) || sha256(body) != tx.tx_id) {
    out.rejected.push_back({tx.tx_id, ledger::TxError::BadSignature});
    return out;
  }
  if (tracked_.contains(tx.tx_id)) return out;
  if (tx_heights_.contains(tx.tx_id) && tx_heights_[tx.tx_id] <= commit_index_) return out;
  if (tx.nonce < contract::expected_nonce(committed_.state(), tx.sender)) {
    out.rejected.push_back({tx.tx_id, ledger::TxError::BadNonce});
    return out;
  }
  // Followers forward on the next tick so that transactions submitted
  // together travel to the leader in one message.
  tracked_[tx.tx_id] = Tracked{tx, 0};
  if (role_ == NodeRole::Leader) admit_to_pool(tx, self_.pubkey, now, out);
  return out;
}

Output RaftCore::request_add_peer(const NodeId& node, std::uint64_t now) {
  Output out;
  const auto& cm = committed_.members();
  if (std::any_of(cm.begin(), cm.end(), [&](const NodeId& n) { return n.pubkey == node.pubkey; })) {
    out.add_peer_rejected.push_back(AddPeerRejected{node.pubkey, "DuplicatePeer"});
    return out;
  }
  tracked_peers_[node.pubkey] = TrackedPeer{node, now};
  if (role_ == NodeRole::Leader) {
    add_peer(node, now, out);
  } else if (leader_hint_ && *leader_hint_ != self_.pubkey) {
    send(*leader_hint_, ForwardAddPeer{node}, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elections

void RaftCore::handle_timeout(std::uint64_t now, Output& out) {
  reset_election_timer(now);
  if (!is_member()) return;  // joining nodes wait until their admission replicates
  ++term_;
  role_ = NodeRole::Candidate;
  voted_for_ = self_.pubkey;
  votes_ = {self_.pubkey};
  leader_hint_.reset();
  out.persist = true;
  out.events.push_back(BecameCandidate{term_});
  if (votes_.size() >= quorum()) {
    become_leader(now, out);
    return;
  }
  VoteRequest req{term_, self_.pubkey, last_height(), tip_.chain().tip(), last_term()};
  for (const auto& m : members())
    if (m.pubkey != self_.pubkey) send(m.pubkey, req, out);
}

VoteResponse RaftCore::handle_vote_request(const VoteRequest& req, std::uint64_t now,
                                           Output& out) {
  step_down_if_newer(req.term, out);
  if (req.term < term_) return VoteResponse{term_, false};
  bool up_to_date = req.last_log_term > last_term() ||
                    (req.last_log_term == last_term() && req.last_log_height >= last_height());
  bool free = !voted_for_ || *voted_for_ == req.candidate;
  if (!(free && up_to_date)) return VoteResponse{term_, false};
  if (!voted_for_) {
    voted_for_ = req.candidate;
    out.persist = true;
  }
  reset_election_timer(now);
  return VoteResponse{term_, true};
}

void RaftCore::handle_vote_response(const PublicKey& from, const VoteResponse& resp,
                                    std::uint64_t now, Output& out) {
  step_down_if_newer(resp.term, out);
  if (role_ != NodeRole::Candidate || resp.term != term_ || !resp.granted) return;
  const auto& m = members();
  if (std::none_of(m.begin(), m.end(), [&](const NodeId& n) { return n.pubkey == from; })) return;
  votes_.insert(from);
  if (votes_.size() >= quorum()) become_leader(now, out);
}

void RaftCore::step_down_if_newer(std::uint64_t term, Output& out) {
  if (term > term_) {
    leader_hint_.reset();
    become_follower(term, out);
  }
}

void RaftCore::become_follower(std::uint64_t term, Output& out) {
  if (term > term_) {
    term_ = term;
    voted_for_.reset();
    out.persist = true;
  }
  if (role_ != NodeRole::Follower) {
    role_ = NodeRole::Follower;
    out.events.push_back(BecameFollower{term_});
  }
  votes_.clear();
  progress_.clear();
  // Pool entries from other nodes are dropped; their origins re-forward.
  // Our own are still tracked and will be re-sent to the next leader.
  pool_.clear();
  pool_ids_.clear();
  for (auto& [id, t] : tracked_) t.last_attempt = 0;
  for (auto& [key, p] : tracked_peers_) p.last_attempt = 0;
}

void RaftCore::become_leader(std::uint64_t now, Output& out) {
  role_ = NodeRole::Leader;
  leader_hint_ = self_.pubkey;
  leader_since_ = now;
  votes_.clear();
  progress_.clear();
  for (const auto& m : members())
    if (m.pubkey != self_.pubkey) progress_[m.pubkey] = Progress{last_height() + 1, 0, now};
  out.events.push_back(BecameLeader{term_});
  // Entries from earlier terms only commit once an entry of this term does.
  if (commit_index_ < last_height()) {
    if (!append_entry(term_, build_block({}, std::nullopt, now), out))
      throw std::logic_error("leader failed to append its own empty block");
    out.persist = true;
  }
  for (auto& [id, t] : tracked_) t.last_attempt = 0;
  for (auto& [key, p] : tracked_peers_) p.last_attempt = 0;
  broadcast_append(now, out);
  next_heartbeat_ = now + timing_.heartbeat_interval;
  advance_commit(out);
}

void RaftCore::check_quorum(std::uint64_t now, Output& out) {
  if (!has_quorum_contact(now)) {
    leader_hint_.reset();
    become_follower(term_, out);
    reset_election_timer(now);
  }
}

bool RaftCore::has_quorum_contact(std::uint64_t now) const {
  const auto window = timing_.election_timeout_max;
  if (role_ == NodeRole::Leader) {
    if (now < leader_since_ + window) return true;
    std::size_t live = is_member() ? 1 : 0;
    for (const auto& [key, p] : progress_)
      if (p.last_ack + window >= now) ++live;
    return live >= quorum();
  }
  return leader_hint_.has_value() && heard_from_leader_ && last_leader_contact_ + window >= now;
}

// ---------------------------------------------------------------------------
// Replication

Block RaftCore::build_block(std::vector<Transaction> txs, std::optional<ConfigChange> config,
                            std::uint64_t now) const {
  const auto& tip = tip_.chain().blocks.back();
  Block b;
  b.height = tip.height + 1;
  b.prev_hash = tip.block_hash;
  b.timestamp = std::max(tip.timestamp, now + timing_.epoch_offset);
  b.proposer = self_.pubkey;
  b.transactions = std::move(txs);
  b.config = std::move(config);
  return seal_block(std::move(b));
}

bool RaftCore::append_entry(std::uint64_t term, const Block& block, Output& out) {
  if (tip_.append(block)) return false;
  terms_.push_back(term);
  out.events.push_back(EntryAppended{block.height, term, block.block_hash});
  for (const auto& tx : block.transactions) tx_heights_[tx.tx_id] = block.height;
  if (role_ == NodeRole::Leader && block.config) {
    for (const auto& n : block.config->nodes)
      if (n.pubkey != self_.pubkey && !progress_.contains(n.pubkey))
        progress_[n.pubkey] = Progress{block.height + 1, 0, leader_since_};
  }
  return true;
}

void RaftCore::truncate_from(std::uint64_t height, Output& out) {
  if (height <= commit_index_) throw std::logic_error("refusing to truncate committed entries");
  const auto old_blocks = tip_.chain().blocks;
  ledger::Ledger rebuilt = committed_;
  for (std::uint64_t h = commit_index_ + 1; h < height; ++h) {
    if (rebuilt.append(old_blocks[h])) throw std::logic_error("log suffix failed to replay");
  }
  tip_ = std::move(rebuilt);
  terms_.resize(height);
  std::erase_if(tx_heights_, [&](const auto& kv) { return kv.second >= height; });
  out.events.push_back(EntriesTruncated{height});
}

std::optional<NotLeader> RaftCore::propose_block(std::uint64_t now, Output& out) {
  if (role_ != NodeRole::Leader) return NotLeader{leader_hint_};
  if (pool_.empty()) return std::nullopt;

  const std::uint64_t height = last_height() + 1;
  auto state = tip_.state();
  std::vector<Transaction> selected;
  std::vector<bool> consumed(pool_.size(), false);
  bool progress = true;
  while (progress && selected.size() < kMaxTransactionsPerBlock) {
    progress = false;
    for (std::size_t i = 0; i < pool_.size() && selected.size() < kMaxTransactionsPerBlock; ++i) {
      if (consumed[i]) continue;
      const auto& entry = pool_[i];
      auto expected = contract::expected_nonce(state, entry.tx.sender);
      if (entry.tx.nonce > expected) {
        if (entry.received_at + timing_.pool_expiry < now) {
          consumed[i] = true;
          reject(entry.origin, entry.tx.tx_id, ledger::TxError::BadNonce, out);
        }
        continue;
      }
      consumed[i] = true;
      if (auto err = ledger::apply_transaction(state, entry.tx, height)) {
        reject(entry.origin, entry.tx.tx_id, *err, out);
        continue;
      }
      selected.push_back(entry.tx);
      progress = true;
    }
  }
  std::vector<PoolEntry> remaining;
  for (std::size_t i = 0; i < pool_.size(); ++i)
    if (!consumed[i]) remaining.push_back(std::move(pool_[i]));
    else pool_ids_.erase(pool_[i].tx.tx_id);
  pool_ = std::move(remaining);
  if (selected.empty()) return std::nullopt;

  if (!append_entry(term_, build_block(std::move(selected), std::nullopt, now), out))
    throw std::logic_error("leader built an invalid block");
  out.persist = true;
  broadcast_append(now, out);
  advance_commit(out);
  return std::nullopt;
}

void RaftCore::broadcast_append(std::uint64_t, Output& out) {
  for (const auto& [key, p] : progress_) send_append(key, out);
}

void RaftCore::send_append(const PublicKey& peer, Output& out) {
  auto& p = progress_[peer];
  p.next_height = std::clamp<std::uint64_t>(p.next_height, 1, last_height() + 1);
  const auto prev = p.next_height - 1;
  AppendEntries ae;
  ae.term = term_;
  ae.leader = self_.pubkey;
  ae.prev_height = prev;
  ae.prev_hash = tip_.chain().blocks[prev].block_hash;
  ae.leader_commit = commit_index_;
  for (auto h = p.next_height;
       h <= last_height() && ae.entries.size() < timing_.max_entries_per_message; ++h)
    ae.entries.push_back(LogEntry{terms_[h], tip_.chain().blocks[h]});
  send(peer, std::move(ae), out);
}

AppendResponse RaftCore::handle_append_entries(const AppendEntries& msg, std::uint64_t now,
                                               Output& out) {
  if (msg.term < term_) return AppendResponse{term_, false, 0};
  step_down_if_newer(msg.term, out);
  if (role_ != NodeRole::Follower) become_follower(term_, out);
  leader_hint_ = msg.leader;
  heard_from_leader_ = true;
  last_leader_contact_ = now;
  reset_election_timer(now);

  if (msg.prev_height > last_height()) return AppendResponse{term_, false, last_height()};
  if (tip_.chain().blocks[msg.prev_height].block_hash != msg.prev_hash)
    return AppendResponse{term_, false, msg.prev_height == 0 ? 0 : msg.prev_height - 1};

  std::uint64_t h = msg.prev_height;
  bool ok = true;
  for (const auto& entry : msg.entries) {
    const auto next = h + 1;
    if (next <= last_height()) {
      if (tip_.chain().blocks[next].block_hash == entry.block.block_hash &&
          terms_[next] == entry.term) {
        h = next;
        continue;
      }
      truncate_from(next, out);
      out.persist = true;
    }
    if (entry.block.height != next || !append_entry(entry.term, entry.block, out)) {
      ok = false;  // failed verification: never appended, whatever the leader claims
      break;
    }
    out.persist = true;
    h = next;
  }
  auto new_commit = std::min(msg.leader_commit, h);
  if (new_commit > commit_index_) apply_commits(new_commit, out);
  return AppendResponse{term_, ok, h};
}

void RaftCore::handle_append_response(const PublicKey& from, const AppendResponse& resp,
                                      std::uint64_t now, Output& out) {
  step_down_if_newer(resp.term, out);
  if (role_ != NodeRole::Leader || resp.term != term_) return;
  auto it = progress_.find(from);
  if (it == progress_.end()) return;
  auto& p = it->second;
  p.last_ack = now;
  if (resp.success) {
    p.match_height = std::max(p.match_height, resp.match_height);
    p.next_height = std::max(p.next_height, p.match_height + 1);
    advance_commit(out);
    if (p.next_height <= last_height()) send_append(from, out);
  } else {
    auto retry = std::min(p.next_height - 1, resp.match_height + 1);
    p.next_height = std::max<std::uint64_t>({retry, p.match_height + 1, 1});
    send_append(from, out);
  }
}

void RaftCore::advance_commit(Output& out) {
  if (role_ != NodeRole::Leader) return;
  for (auto h = last_height(); h > commit_index_; --h) {
    if (terms_[h] != term_) break;  // only current-term entries are committed by counting
    std::size_t acks = is_member() ? 1 : 0;
    for (const auto& m : members()) {
      if (m.pubkey == self_.pubkey) continue;
      auto it = progress_.find(m.pubkey);
      if (it != progress_.end() && it->second.match_height >= h) ++acks;
    }
    if (acks >= quorum()) {
      apply_commits(h, out);
      break;
    }
  }
}

void RaftCore::apply_commits(std::uint64_t new_commit, Output& out) {
  for (auto h = commit_index_ + 1; h <= new_commit; ++h) {
    const auto& block = tip_.chain().blocks[h];
    if (auto err = committed_.append(block))
      throw std::logic_error("committed block failed to apply: " + err->describe());
    for (const auto& tx : block.transactions) tracked_.erase(tx.tx_id);
    if (block.config)
      for (const auto& n : block.config->nodes) tracked_peers_.erase(n.pubkey);
    out.committed.push_back(block);
    out.events.push_back(BlockCommitted{h, contract::state_digest(committed_.state())});
  }
  commit_index_ = new_commit;
  out.persist = true;
}

// ---------------------------------------------------------------------------
// Membership

std::optional<AddPeerError> RaftCore::add_peer(const NodeId& node, std::uint64_t now, Output& out) {
  if (role_ != NodeRole::Leader) return AddPeerError::NotLeader;
  const auto& m = members();
  if (std::any_of(m.begin(), m.end(), [&](const NodeId& n) { return n.pubkey == node.pubkey; }))
    return AddPeerError::DuplicatePeer;
  for (auto h = commit_index_ + 1; h <= last_height(); ++h)
    if (tip_.chain().blocks[h].config) return AddPeerError::ChangeInProgress;
  auto block = build_block({}, ConfigChange{ConfigChange::Kind::AddPeer, {node}}, now);
  if (!append_entry(term_, block, out)) throw std::logic_error("leader built an invalid config block");
  out.persist = true;
  broadcast_append(now, out);
  advance_commit(out);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Client transactions

void RaftCore::admit_to_pool(const Transaction& tx, const PublicKey& origin, std::uint64_t now,
                             Output& out) {
  if (pool_ids_.contains(tx.tx_id) || tx_heights_.contains(tx.tx_id)) return;
  auto body = encode_tx_body(tx.sender, tx.nonce, tx.payload);
  if (!verify_signature(tx.sender, body, tx.signature) || sha256(body) != tx.tx_id) {
    reject(origin, tx.tx_id, ledger::TxError::BadSignature, out);
    return;
  }
  if (tx.nonce < contract::expected_nonce(tip_.state(), tx.sender)) {
    reject(origin, tx.tx_id, ledger::TxError::BadNonce, out);
    return;
  }
  pool_.push_back(PoolEntry{tx, origin, now});
  pool_ids_.insert(tx.tx_id);
}

void RaftCore::reject(const PublicKey& origin, const Digest& tx_id, ledger::TxError reason,
                      Output& out) {
  if (origin == self_.pubkey) {
    if (tracked_.erase(tx_id) > 0) out.rejected.push_back({tx_id, reason});
  } else {
    send(origin, TxRejected{{{tx_id, reason}}}, out);
  }
}

void RaftCore::retry_tracked(std::uint64_t now, Output& out) {
  ForwardTransactions batch;
  std::vector<Transaction> local;
  for (auto& [id, t] : tracked_) {
    if (t.last_attempt + timing_.retry_interval > now && t.last_attempt != 0) continue;
    // A leader's own log will commit; a follower's copy may be a stale suffix
    // the current leader never saw, so followers keep forwarding until commit.
    if (role_ == NodeRole::Leader && tx_heights_.contains(id)) continue;
    t.last_attempt = now;
    if (role_ == NodeRole::Leader)
      local.push_back(t.tx);
    else if (leader_hint_ && *leader_hint_ != self_.pubkey)
      batch.txs.push_back(t.tx);
  }
  for (const auto& tx : local) admit_to_pool(tx, self_.pubkey, now, out);
  if (!batch.txs.empty()) send(*leader_hint_, std::move(batch), out);

  for (auto& [key, p] : tracked_peers_) {
    if (p.last_attempt + timing_.retry_interval > now && p.last_attempt != 0) continue;
    p.last_attempt = now;
    if (role_ == NodeRole::Leader)
      add_peer(p.node, now, out);
    else if (leader_hint_ && *leader_hint_ != self_.pubkey)
      send(*leader_hint_, ForwardAddPeer{p.node}, out);
  }
}

std::uint64_t RaftCore::suggested_nonce(const Account& account) const {
  auto next = contract::expected_nonce(tip_.state(), account);
  for (const auto& [id, t] : tracked_)
    if (t.tx.sender == account) next = std::max(next, t.tx.nonce + 1);
  for (const auto& e : pool_)
    if (e.tx.sender == account) next = std::max(next, e.tx.nonce + 1);
  return next;
}

PersistentState RaftCore::persistent_state() const {
  PersistentState s;
  s.current_term = term_;
  s.voted_for = voted_for_;
  s.commit_index = commit_index_;
  const auto& blocks = tip_.chain().blocks;
  s.log.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) s.log.push_back(LogEntry{terms_[i], blocks[i]});
  return s;
}

}  // namespace rmsd::consensus
