#include <algorithm>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <sstream>

#include "rmsd/sim/sim.hpp"

namespace rmsd::sim {

using consensus::Envelope;
using consensus::Output;
using consensus::RaftCore;
using nlohmann::json;

std::string Trace::to_jsonl() const {
  std::string out;
  for (const auto& e : events) {
    out += e.dump();
    out += '\n';
  }
  return out;
}

Trace Trace::from_jsonl(std::string_view text) {
  Trace t;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty()) t.events.push_back(json::parse(line));
    pos = end + 1;
  }
  return t;
}

namespace {

struct Delivery {
  std::uint64_t time;
  std::uint64_t tiebreak;
  std::uint64_t seq;
  Envelope env;
};

struct LaterFirst {
  bool operator()(const Delivery& a, const Delivery& b) const {
    return std::tie(a.time, a.tiebreak, a.seq) > std::tie(b.time, b.tiebreak, b.seq);
  }
};

struct SimNode {
  NodeId id;
  KeyPair key;
  std::unique_ptr<RaftCore> core;
  std::optional<consensus::PersistentState> disk;
  std::set<Digest> committed_txs;
  std::uint64_t restarts = 0;
  bool alive() const { return core != nullptr; }
};

struct OpState {
  Transaction tx;
  bool submitted = false;
  bool rejected = false;
  std::uint64_t last_submit = 0;
  std::optional<std::pair<Digest, std::vector<std::string>>> personal;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

std::string_view fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::Partition: return "partition";
    case FaultKind::Heal: return "heal";
    case FaultKind::Crash: return "crash";
    case FaultKind::Restart: return "restart";
    case FaultKind::Drop: return "drop";
  }
  return "?";
}

Payload op_payload(const WorkloadOp& op, const Digest& personal_ref) {
  switch (op.op) {
    case OpKind::SetUser: return SetUser{actor_key(op.target).public_key(), op.role};
    case OpKind::CreateNeed: return CreateNeed{op.kind, op.amount, op.unit, personal_ref};
    case OpKind::CreateSupport:
      return CreateSupport{op.kind, op.amount, op.unit, op.shipping, personal_ref};
    case OpKind::ApproveNeed: return ApproveNeed{op.id};
    case OpKind::ApproveSupport: return ApproveSupport{op.id};
  }
  throw std::logic_error("unknown op");
}

class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg.nodes == 0) throw std::invalid_argument("node_count must be at least 1");
    timing_ = cfg.timing;
    genesis_ = sim_genesis(cfg.nodes);
    timing_.epoch_offset = genesis_.timestamp;
    for (std::size_t i = 0; i < cfg.nodes; ++i) {
      SimNode n{sim_node_id(i), sim_node_key(i), nullptr, std::nullopt, {}, 0};
      n.core = std::make_unique<RaftCore>(n.id, genesis_, timing_, mix(cfg.seed, i), 0);
      index_[n.id.pubkey] = i;
      nodes_.push_back(std::move(n));
    }
    faults_ = cfg.faults;
    std::stable_sort(faults_.begin(), faults_.end(),
                     [](const Fault& a, const Fault& b) { return a.time < b.time; });
    for (const auto& f : faults_) last_fault_time_ = std::max(last_fault_time_, f.time);
    prepare_workload();
    emit({{"ev", "start"}, {"nodes", cfg.nodes}, {"seed", cfg.seed},
          {"genesis", to_hex(genesis_.block_hash)}});
  }

  SimResult run() {
    SimResult r;
    std::uint64_t t = 0;
    for (; t <= cfg_.time_cap; ++t) {
      now_ = t;
      apply_faults();
      drive_workload();
      deliver_due();
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].alive()) handle_output(i, nodes_[i].core->tick(now_));
      if (quiescent()) {
        r.quiescent = true;
        r.completed_at = now_;
        break;
      }
    }
    r.time_cap_exceeded = !r.quiescent;
    r.end_time = std::min(t, cfg_.time_cap);
    r.last_fault_time = std::max(last_fault_time_, last_op_time_);
    r.rejected_ops = std::count_if(ops_.begin(), ops_.end(), [](const OpState& o) { return o.rejected; });
    std::size_t longest = 0;
    for (auto& n : nodes_) {
      if (!n.alive()) {
        r.final_tips.push_back(std::nullopt);
        r.final_digests.push_back(std::nullopt);
        continue;
      }
      const auto& c = n.core->committed();
      r.final_tips.push_back(c.chain().tip());
      r.final_digests.push_back(contract::state_digest(c.state()));
      if (c.chain().blocks.size() > longest) {
        longest = c.chain().blocks.size();
        r.committed_chain = c.chain().blocks;
      }
    }
    emit({{"ev", "end"}, {"quiescent", r.quiescent}, {"time_cap_exceeded", r.time_cap_exceeded}});
    r.trace = std::move(trace_);
    return r;
  }

 private:
  void emit(json e) {
    e["t"] = now_;
    trace_.events.push_back(std::move(e));
  }

  void prepare_workload() {
    std::mt19937_64 personal_rng(mix(cfg_.seed, 0xC0FFEE));
    auto sentinel = [&] {
      static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
      std::string s(32, ' ');
      for (auto& c : s) c = kAlphabet[personal_rng() % (sizeof(kAlphabet) - 1)];
      return s;
    };
    std::map<std::string, std::uint64_t> next_nonce;
    next_nonce["admin"] = 1;  // nonce 0 is the genesis self-grant
    for (std::size_t i = 0; i < cfg_.workload.size(); ++i) {
      const auto& op = cfg_.workload[i];
      for (auto d : op.after)
        if (d >= i) throw std::invalid_argument("workload dependency must refer to an earlier op");
      if (op.node >= cfg_.nodes) throw std::invalid_argument("workload entry node out of range");
      OpState s;
      Digest ref;
      if (op.op == OpKind::CreateNeed || op.op == OpKind::CreateSupport) {
        std::vector<std::string> fields = {sentinel(), sentinel(), sentinel(), sentinel()};
        Bytes secret(32);
        for (auto& b : secret) b = static_cast<std::uint8_t>(personal_rng());
        ref = sha256(secret);
        s.personal = {ref, fields};
      }
      auto& nonce = next_nonce[op.actor];
      if (op.nonce) nonce = *op.nonce;
      s.tx = make_transaction(actor_key(op.actor), nonce++, op_payload(op, ref));
      tx_to_op_[s.tx.tx_id] = i;
      ops_.push_back(std::move(s));
      last_op_time_ = std::max(last_op_time_, op.time);
    }
  }

  bool reachable(std::size_t a, std::size_t b) const {
    for (const auto& [x, y] : partitions_)
      if ((x.contains(a) && y.contains(b)) || (x.contains(b) && y.contains(a))) return false;
    return true;
  }

  void apply_faults() {
    while (next_fault_ < faults_.size() && faults_[next_fault_].time <= now_) {
      const auto& f = faults_[next_fault_++];
      json e = {{"ev", "fault"}, {"kind", fault_kind_name(f.kind)}};
      switch (f.kind) {
        case FaultKind::Partition:
          partitions_.emplace_back(std::set<std::size_t>(f.side_a.begin(), f.side_a.end()),
                                   std::set<std::size_t>(f.side_b.begin(), f.side_b.end()));
          e["a"] = f.side_a;
          e["b"] = f.side_b;
          break;
        case FaultKind::Heal:
          partitions_.clear();
          drop_until_ = 0;
          break;
        case FaultKind::Crash:
          e["node"] = f.node;
          if (f.node < nodes_.size() && nodes_[f.node].alive()) {
            auto& n = nodes_[f.node];
            n.disk = n.core->persistent_state();
            n.core.reset();
          }
          break;
        case FaultKind::Restart:
          e["node"] = f.node;
          if (f.node < nodes_.size() && !nodes_[f.node].alive()) {
            auto& n = nodes_[f.node];
            ++n.restarts;
            n.core = std::make_unique<RaftCore>(n.id, *n.disk, timing_,
                                                mix(cfg_.seed, f.node * 1000 + n.restarts), now_);
            n.committed_txs.clear();
            for (const auto& b : n.core->committed().chain().blocks)
              for (const auto& tx : b.transactions) n.committed_txs.insert(tx.tx_id);
          }
          break;
        case FaultKind::Drop:
          drop_probability_ = f.probability;
          drop_until_ = now_ + f.duration;
          e["p"] = f.probability;
          e["duration"] = f.duration;
          break;
      }
      emit(std::move(e));
    }
  }

  std::optional<std::size_t> entry_for(std::size_t preferred) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      auto i = (preferred + k) % nodes_.size();
      if (nodes_[i].alive()) return i;
    }
    return std::nullopt;
  }

  bool op_done(std::size_t i) const {
    if (ops_[i].rejected) return true;
    for (const auto& n : nodes_)
      if (n.alive() && !n.committed_txs.contains(ops_[i].tx.tx_id)) return false;
    return true;
  }

  void drive_workload() {
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      auto& s = ops_[i];
      const auto& op = cfg_.workload[i];
      if (op.time > now_ || s.rejected) continue;
      auto entry = entry_for(op.node);
      if (!entry) continue;
      auto& node = nodes_[*entry];
      if (node.committed_txs.contains(s.tx.tx_id)) continue;
      if (s.submitted && now_ < s.last_submit + kClientRetry) continue;
      bool ready = std::all_of(op.after.begin(), op.after.end(), [&](std::size_t d) {
        return node.committed_txs.contains(ops_[d].tx.tx_id);
      });
      if (!ready) continue;
      if (!s.submitted && s.personal) {
        emit({{"ev", "personal"}, {"op", i}, {"node", *entry}, {"ref", to_hex(s.personal->first)},
              {"fields", s.personal->second}});
      }
      s.submitted = true;
      s.last_submit = now_;
      emit({{"ev", "submit"}, {"op", i}, {"node", *entry}, {"tx", to_hex(s.tx.tx_id)}});
      handle_output(*entry, node.core->submit(s.tx, now_));
    }
  }

  void deliver_due() {
    while (!inflight_.empty() && inflight_.top().time <= now_) {
      auto d = inflight_.top();
      inflight_.pop();
      auto from = index_.at(d.env.from), to = index_.at(d.env.to);
      auto type = consensus::message_type(d.env.msg);
      if (!nodes_[to].alive()) {
        if (cfg_.record_messages)
          emit({{"ev", "drop"}, {"from", from}, {"to", to}, {"type", type}, {"reason", "crashed"}});
        continue;
      }
      if (cfg_.sign_messages && !consensus::verify_envelope(d.env)) {
        emit({{"ev", "drop"}, {"from", from}, {"to", to}, {"type", type}, {"reason", "bad-signature"}});
        continue;
      }
      if (cfg_.record_messages) emit({{"ev", "deliver"}, {"from", from}, {"to", to}, {"type", type}});
      handle_output(to, nodes_[to].core->receive(d.env, now_));
    }
  }

  void route(std::size_t from, Envelope env) {
    auto it = index_.find(env.to);
    if (it == index_.end()) return;
    auto to = it->second;
    auto type = consensus::message_type(env.msg);
    const char* reason = nullptr;
    if (!reachable(from, to)) {
      reason = "partition";
    } else if (now_ < drop_until_) {
      double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      if (u < drop_probability_) reason = "loss";
    }
    if (reason) {
      if (cfg_.record_messages)
        emit({{"ev", "drop"}, {"from", from}, {"to", to}, {"type", type}, {"reason", reason}});
      return;
    }
    auto lo = std::max<std::uint64_t>(1, cfg_.latency_min);
    auto hi = std::max(lo, cfg_.latency_max);
    auto at = now_ + lo + rng_() % (hi - lo + 1);
    if (cfg_.sign_messages) consensus::sign_envelope(env, nodes_[from].key);
    if (cfg_.record_messages)
      emit({{"ev", "send"}, {"from", from}, {"to", to}, {"type", type},
            {"term", consensus::message_term(env.msg)}, {"deliver_at", at}});
    inflight_.push(Delivery{at, rng_(), seq_++, std::move(env)});
  }

  void handle_output(std::size_t i, Output&& out) {
    auto& node = nodes_[i];
    std::size_t committed_pos = 0;
    for (const auto& ev : out.events) {
      std::visit(
          [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, consensus::BecameCandidate>) {
              emit({{"ev", "role"}, {"node", i}, {"role", "candidate"}, {"term", e.term}});
            } else if constexpr (std::is_same_v<E, consensus::BecameFollower>) {
              emit({{"ev", "role"}, {"node", i}, {"role", "follower"}, {"term", e.term}});
            } else if constexpr (std::is_same_v<E, consensus::BecameLeader>) {
              // The log as it stood at election, before any no-op is appended.
              json log = json::array();
              auto blocks = node.core->tip().chain().blocks;
              for (const auto& b : blocks)
                if (node.core->term_at(b.height) < e.term) log.push_back(to_hex(b.block_hash));
              emit({{"ev", "leader"}, {"node", i}, {"term", e.term}, {"log", std::move(log)}});
            } else if constexpr (std::is_same_v<E, consensus::EntryAppended>) {
              emit({{"ev", "append"}, {"node", i}, {"height", e.height}, {"term", e.term},
                    {"hash", to_hex(e.hash)}});
            } else if constexpr (std::is_same_v<E, consensus::EntriesTruncated>) {
              emit({{"ev", "truncate"}, {"node", i}, {"from", e.from}});
            } else if constexpr (std::is_same_v<E, consensus::BlockCommitted>) {
              const auto& b = out.committed.at(committed_pos++);
              for (const auto& tx : b.transactions) node.committed_txs.insert(tx.tx_id);
              emit({{"ev", "commit"}, {"node", i}, {"height", e.height},
                    {"term", node.core->term_at(e.height)}, {"at_term", node.core->current_term()},
                    {"hash", to_hex(b.block_hash)},
                    {"block", to_base64(encode_block(b))}, {"digest", to_hex(e.state_digest)}});
            }
          },
          ev);
    }
    for (const auto& r : out.rejected) {
      auto it = tx_to_op_.find(r.tx_id);
      emit({{"ev", "rejected"}, {"node", i}, {"tx", to_hex(r.tx_id)},
            {"reason", ledger::tx_error_name(r.reason)}});
      if (it != tx_to_op_.end()) ops_[it->second].rejected = true;
    }
    for (auto& m : out.messages) route(i, std::move(m));
  }

  bool quiescent() const {
    if (next_fault_ < faults_.size() || now_ < last_op_time_) return false;
    std::optional<std::uint64_t> commit;
    bool leader = false;
    for (const auto& n : nodes_) {
      if (!n.alive()) continue;
      if (n.core->role() == consensus::NodeRole::Leader) leader = true;
      if (commit && *commit != n.core->commit_index()) return false;
      commit = n.core->commit_index();
    }
    if (!leader) return false;
    for (std::size_t i = 0; i < ops_.size(); ++i)
      if (!op_done(i)) return false;
    return true;
  }

  static constexpr std::uint64_t kClientRetry = 1000;

  const SimConfig& cfg_;
  std::mt19937_64 rng_;
  consensus::Timing timing_;
  Block genesis_;
  std::vector<SimNode> nodes_;
  std::map<PublicKey, std::size_t> index_;
  std::vector<Fault> faults_;
  std::size_t next_fault_ = 0;
  std::uint64_t last_fault_time_ = 0;
  std::uint64_t last_op_time_ = 0;
  std::vector<std::pair<std::set<std::size_t>, std::set<std::size_t>>> partitions_;
  double drop_probability_ = 0;
  std::uint64_t drop_until_ = 0;
  std::vector<OpState> ops_;
  std::map<Digest, std::size_t> tx_to_op_;
  std::priority_queue<Delivery, std::vector<Delivery>, LaterFirst> inflight_;
  std::uint64_t seq_ = 0;
  std::uint64_t now_ = 0;
  Trace trace_;
};

}  // namespace

SimResult run_sim(const SimConfig& config) {
  Simulator sim(config);
  return sim.run();
}

bool liveness_ok(const SimResult& result, std::uint64_t bound) {
  if (!result.quiescent || !result.completed_at || result.rejected_ops > 0) return false;
  return *result.completed_at <= result.last_fault_time + bound;
}

}  // namespace rmsd::sim
