// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fail.
// Usage: acceptance [--seeds N]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cluster_support.hpp"
#include "rmsd/cli/cli.hpp"
#include "rmsd/ledger.hpp"
#include "rmsd/sim/sim.hpp"

using namespace rmsd;
using namespace rmsd::test;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
  double seconds = 0;
};

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string random_sentinel(std::mt19937_64& rng) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  std::string s(32, ' ');
  for (auto& c : s) c = kAlphabet[rng() % (sizeof(kAlphabet) - 1)];
  return s;
}

bool contains_bytes(const Bytes& hay, const std::string& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// ---------------------------------------------------------------- e2e network

struct CliResult {
  int code;
  std::string out, err;
  json j() const { return json::parse(out); }
};

CliResult cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class E2eNetwork {
 public:
  E2eNetwork() : root_(fs::temp_directory_path() / ("rmsd-acceptance-" + std::to_string(::getpid()))) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~E2eNetwork() {
    nodes_.clear();
    std::error_code ec;
    fs::remove_all(root_, ec);
  }

  std::string path(const std::string& p) const { return (root_ / p).string(); }
  std::string url(std::size_t i) const { return "http://127.0.0.1:" + std::to_string(http_[i]); }
  std::size_t size() const { return nodes_.size(); }
  node::NodeService& node(std::size_t i) { return *nodes_[i]; }

  void write_config(std::size_t n) {
    json cfg = {{"admin_key", "admin.key"}, {"nodes", json::array()}};
    for (std::size_t i = 0; i < n; ++i) {
      http_.push_back(free_port());
      raft_.push_back(free_port());
      cfg["nodes"].push_back({{"data_dir", "n" + std::to_string(i)},
                              {"host", "127.0.0.1"},
                              {"port", http_.back()},
                              {"raftport", raft_.back()}});
    }
    std::ofstream(root_ / "network.json") << cfg.dump(2);
  }

  std::pair<std::uint16_t, std::uint16_t> reserve_ports() {
    http_.push_back(free_port());
    raft_.push_back(free_port());
    return {http_.back(), raft_.back()};
  }

  void start(std::size_t i) {
    node::NodeConfig c;
    c.data_dir = root_ / ("n" + std::to_string(i));
    c.listen = {"127.0.0.1", http_[i]};
    c.raft_listen = {"127.0.0.1", raft_[i]};
    c.seed = i + 1;
    c.http_threads = 4;
    if (nodes_.size() <= i) nodes_.resize(i + 1);
    nodes_[i] = std::make_unique<node::NodeService>(c);
    nodes_[i]->start();
  }

  bool wait_for_leader() {
    return wait_until([&] {
      for (auto& n : nodes_)
        if (n && n->status().role == consensus::NodeRole::Leader && n->status().quorum) return true;
      return false;
    });
  }

  /// All nodes at the same height, tip and state digest.
  bool wait_converged() {
    return wait_until([&] {
      auto first = nodes_[0]->snapshot();
      for (auto& n : nodes_) {
        auto s = n->snapshot();
        if (s->height != first->height || s->tip != first->tip || s->state_digest != first->state_digest)
          return false;
      }
      return true;
    });
  }

 private:
  fs::path root_;
  std::vector<std::uint16_t> http_, raft_;
  std::vector<std::unique_ptr<node::NodeService>> nodes_;
};

struct E2eResults {
  Outcome scenario_a, scenario_b;
  // Privacy and determinism evidence from the live chains.
  bool privacy_ok = false, determinism_ok = false;
  std::string privacy_detail, determinism_detail;
};

#define E2E_REQUIRE(cond, msg)        \
  do {                                \
    if (!(cond)) {                    \
      out.detail = (msg);             \
      out.seconds = since(t0);        \
      return out;                     \
    }                                 \
  } while (0)

struct PersonalFields {
  std::string name, phone, address, notes;
  std::vector<std::string> all() const { return {name, phone, address, notes}; }
};

PersonalFields sentinel_fields(std::mt19937_64& rng) {
  return {random_sentinel(rng), random_sentinel(rng), random_sentinel(rng), random_sentinel(rng)};
}

std::vector<std::string> personal_args(const PersonalFields& p) {
  return {"--name", p.name, "--phone", p.phone, "--address", p.address, "--notes", p.notes};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::optional<std::uint64_t> record_id(node::NodeService& n, const std::string& ref_hex, bool support) {
  auto snap = n.snapshot();
  if (support) {
    for (const auto& r : snap->state.supports)
      if (to_hex(r.personal_ref) == ref_hex) return r.support_id;
  } else {
    for (const auto& r : snap->state.needs)
      if (to_hex(r.personal_ref) == ref_hex) return r.need_id;
  }
  return std::nullopt;
}

std::string failure_text(const CliResult& r) { return "exit " + std::to_string(r.code) + ": " + r.err + r.out; }

Outcome scenario_a(E2eNetwork& net, std::vector<std::string>& sentinels, std::vector<std::string>& refs) {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(std::random_device{}());
  net.write_config(3);
  auto init = cli_run({"--json", "init-network", "--config", net.path("network.json")});
  E2E_REQUIRE(init.code == 0, "init-network: " + failure_text(init));
  for (std::size_t i = 0; i < 3; ++i) net.start(i);
  E2E_REQUIRE(net.wait_for_leader(), "no leader elected");

  const auto entry = net.url(1);
  E2E_REQUIRE(cli_run({"keygen", "--out", net.path("checker")}).code == 0, "keygen failed");
  auto checker = node::read_key_file(net.path("checker.key"));
  auto grant = cli_run({"--node", entry, "tx", "grant", to_hex(checker.public_key()), "checker", "--key",
                        net.path("admin.key")});
  E2E_REQUIRE(grant.code == 0, "grant: " + failure_text(grant));

  auto p = sentinel_fields(rng);
  auto need = cli_run(concat({"--node", entry, "--json", "tx", "create-need", "--category", "food", "--amount",
                              "120", "--unit", "kg"},
                             personal_args(p)));
  E2E_REQUIRE(need.code == 0, "create-need: " + failure_text(need));
  const auto all = p.all();
  sentinels.insert(sentinels.end(), all.begin(), all.end());
  refs.push_back(need.j().at("personal_ref").get<std::string>());
  auto need_id = record_id(net.node(1), refs.back(), false);
  E2E_REQUIRE(need_id, "committed need not found by personal_ref");

  auto approve = cli_run({"--node", entry, "tx", "approve", "need", std::to_string(*need_id), "--key",
                          net.path("checker.key")});
  E2E_REQUIRE(approve.code == 0, "approve: " + failure_text(approve));
  E2E_REQUIRE(net.wait_converged(), "nodes did not converge");

  auto s0 = net.node(0).snapshot();
  for (std::size_t i = 0; i < 3; ++i) {
    auto s = net.node(i).snapshot();
    E2E_REQUIRE(s->tip == s0->tip, "tip differs on node " + std::to_string(i));
    E2E_REQUIRE(s->state_digest == s0->state_digest, "state digest differs on node " + std::to_string(i));
    E2E_REQUIRE(s->state.needs.size() > *need_id &&
                    s->state.needs[*need_id].status == contract::Status::Approved,
                "need not approved on node " + std::to_string(i));
  }
  out.seconds = since(t0);
  out.ok = out.seconds < 30;
  out.detail = "3/3 nodes at height " + std::to_string(s0->height) + ", tip " + to_hex(s0->tip).substr(0, 12) +
               ", need " + std::to_string(*need_id) + " approved";
  if (!out.ok) out.detail += " (over the 30 s budget)";
  return out;
}

Outcome scenario_b(E2eNetwork& net, double a_seconds, std::vector<std::string>& sentinels,
                   std::vector<std::string>& refs) {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(std::random_device{}());
  const auto entry = net.url(0);
  for (std::size_t i = 3; i < 5; ++i) {
    const auto name = "n" + std::to_string(i);
    E2E_REQUIRE(cli_run({"keygen", "--out", net.path(name + "node")}).code == 0, "keygen failed");
    auto [port, raftport] = net.reserve_ports();
    auto join = cli_run({"--node", entry, "join", "--data-dir", net.path(name), "--key",
                         net.path(name + "node.key"), "--admin-key", net.path("admin.key"), "--host",
                         "127.0.0.1", "--port", std::to_string(port), "--raftport", std::to_string(raftport)});
    E2E_REQUIRE(join.code == 0, "join " + name + ": " + failure_text(join));
    net.start(i);
  }
  E2E_REQUIRE(net.wait_converged(), "joined nodes did not catch up");

  const auto joined = net.url(4);
  auto p = sentinel_fields(rng);
  auto support = cli_run(concat({"--node", joined, "--json", "tx", "create-support", "--category", "tents",
                                 "--amount", "40", "--unit", "pcs", "--shipping", "truck"},
                                personal_args(p)));
  E2E_REQUIRE(support.code == 0, "create-support: " + failure_text(support));
  const auto all = p.all();
  sentinels.insert(sentinels.end(), all.begin(), all.end());
  refs.push_back(support.j().at("personal_ref").get<std::string>());
  auto found = record_id(net.node(4), refs.back(), true);
  E2E_REQUIRE(found, "committed support not found by personal_ref");
  const auto support_id = *found;
  auto approve = cli_run({"--node", joined, "tx", "approve", "support", std::to_string(support_id), "--key",
                          net.path("checker.key")});
  E2E_REQUIRE(approve.code == 0, "approve support: " + failure_text(approve));
  E2E_REQUIRE(net.wait_converged(), "5 nodes did not converge");

  auto s0 = net.node(0).snapshot();
  for (std::size_t i = 0; i < 5; ++i) {
    auto s = net.node(i).snapshot();
    E2E_REQUIRE(s->members.size() == 5, "node " + std::to_string(i) + " does not see 5 members");
    E2E_REQUIRE(s->tip == s0->tip && s->state_digest == s0->state_digest,
                "node " + std::to_string(i) + " disagrees");
    E2E_REQUIRE(s->state.supports.size() > support_id &&
                    s->state.supports[support_id].status == contract::Status::Approved &&
                    s->state.supports[support_id].shipping == "truck",
                "support not approved with shipping on node " + std::to_string(i));
  }
  out.seconds = a_seconds + since(t0);
  out.ok = out.seconds < 60;
  out.detail = "5/5 nodes at height " + std::to_string(s0->height) + ", tip " + to_hex(s0->tip).substr(0, 12) +
               ", support " + std::to_string(support_id) + " approved (shipping truck)";
  if (!out.ok) out.detail += " (over the 60 s budget)";
  return out;
}

E2eResults run_e2e() {
  E2eResults res;
  E2eNetwork net;
  std::vector<std::string> sentinels, refs;
  res.scenario_a = scenario_a(net, sentinels, refs);
  if (res.scenario_a.ok)
    res.scenario_b = scenario_b(net, res.scenario_a.seconds, sentinels, refs);
  else
    res.scenario_b.detail = "skipped: scenario A failed";
  if (net.size() == 0) {
    res.privacy_detail = res.determinism_detail = "no e2e chain";
    return res;
  }

  // Privacy: scan every committed block on every node, delete the records, revalidate.
  std::size_t blocks_scanned = 0, hits = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto snap = net.node(i).snapshot();
    for (const auto& b : *snap->blocks) {
      auto bytes = encode_block(b);
      ++blocks_scanned;
      for (const auto& s : sentinels)
        if (contains_bytes(bytes, s)) ++hits;
    }
  }
  std::size_t deleted = 0;
  // Each record lives on the node that took the application: n1 for the need, n4 for the support.
  const std::size_t entry_nodes[] = {1, 4};
  for (std::size_t k = 0; k < refs.size(); ++k) {
    auto r = cli_run({"--node", net.url(entry_nodes[k]), "personal", "delete", refs[k], "--key",
                      net.path("admin.key")});
    if (r.code == 0) ++deleted;
  }
  bool chains_valid = true;
  for (std::size_t i = 0; i < net.size(); ++i) {
    Chain chain{*net.node(i).snapshot()->blocks};
    if (ledger::validate_chain(chain)) chains_valid = false;
  }
  res.privacy_ok = !sentinels.empty() && hits == 0 && deleted == refs.size() && chains_valid;
  res.privacy_detail = "e2e: " + std::to_string(sentinels.size()) + " sentinels, " +
                       std::to_string(blocks_scanned) + " blocks scanned, " + std::to_string(hits) + " hits, " +
                       std::to_string(deleted) + "/" + std::to_string(refs.size()) +
                       " records deleted, validate_chain " + (chains_valid ? "OK" : "FAILED");

  // Determinism: replay each node's chain into a fresh ledger.
  bool replay_ok = true;
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto snap = net.node(i).snapshot();
    auto replayed = ledger::replay_chain(Chain{*snap->blocks});
    if (!replayed || contract::state_digest(replayed->state()) != snap->state_digest ||
        contract::encode_state(replayed->state()) != contract::encode_state(snap->state))
      replay_ok = false;
  }
  res.determinism_ok = replay_ok;
  res.determinism_detail = "e2e replay on " + std::to_string(net.size()) + " nodes " + (replay_ok ? "matches" : "DIFFERS");
  return res;
}

// ---------------------------------------------------------------- simulation sweep

struct SweepResults {
  Outcome safety, liveness;
  bool privacy_ok = false, determinism_ok = false;
  std::string privacy_detail, determinism_detail;
};

sim::SimConfig faulty(std::uint64_t seed) {
  sim::SimConfig c;
  c.nodes = 5;
  c.seed = seed;
  c.faults = sim::random_faults(seed, 5);
  c.workload = sim::mixed_workload(seed, 5);
  return c;
}

SweepResults run_sweep(std::uint64_t seeds) {
  SweepResults res;
  const auto t0 = Clock::now();
  const sim::Property safety[] = {sim::Property::ElectionSafety, sim::Property::LogMatching,
                                  sim::Property::LeaderCompleteness, sim::Property::StateMachineSafety};
  const sim::Property privacy[] = {sim::Property::PrivacySeparation};
  std::size_t safety_violations = 0, privacy_violations = 0, live = 0, unlive_unsafe = 0;
  std::size_t replay_mismatch = 0, trace_mismatch = 0, trace_repeats = 0, sentinel_events = 0;
  std::string first_violation, first_unlive;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto cfg = faulty(seed);
    auto r = sim::run_sim(cfg);
    auto v = sim::check_trace(r.trace, safety);
    if (v) {
      ++safety_violations;
      if (first_violation.empty())
        first_violation = "seed " + std::to_string(seed) + ": " + std::string(sim::property_name(v->property)) +
                          ": " + v->detail;
    }
    if (sim::check_trace(r.trace, privacy)) ++privacy_violations;
    for (const auto& e : r.trace.events)
      if (e.value("ev", "") == "personal") ++sentinel_events;
    if (sim::liveness_ok(r, 3000)) {
      ++live;
    } else {
      if (v) ++unlive_unsafe;
      if (first_unlive.empty()) first_unlive = "first miss: seed " + std::to_string(seed);
    }

    auto replayed = ledger::replay_chain(Chain{r.committed_chain});
    if (!replayed) {
      ++replay_mismatch;
    } else {
      const auto digest = contract::state_digest(replayed->state());
      for (std::size_t n = 0; n < r.final_tips.size(); ++n)
        if (r.final_tips[n] && *r.final_tips[n] == r.committed_chain.back().block_hash &&
            r.final_digests[n] != digest)
          ++replay_mismatch;
    }
    if (seed % 50 == 0) {
      ++trace_repeats;
      if (sim::run_sim(cfg).trace.to_jsonl() != r.trace.to_jsonl()) ++trace_mismatch;
    }
  }
  const double secs = since(t0);
  res.safety.seconds = res.liveness.seconds = secs;
  res.safety.ok = safety_violations == 0 && secs < 600;
  res.safety.detail = std::to_string(seeds) + " seeds x 5 nodes, " + std::to_string(safety_violations) +
                      " violations" + (first_violation.empty() ? "" : " (" + first_violation + ")");
  res.liveness.ok = live * 100 >= seeds * 99 && unlive_unsafe == 0;
  res.liveness.detail = std::to_string(live) + "/" + std::to_string(seeds) +
                        " seeds recovered within 3000 ms after the last fault" +
                        (first_unlive.empty() ? "" : ", " + first_unlive) + ", " +
                        std::to_string(unlive_unsafe) + " unlive seeds with safety violations";
  res.privacy_ok = privacy_violations == 0 && sentinel_events > 0;
  res.privacy_detail = "sim: " + std::to_string(sentinel_events) + " sentinel applications, " +
                       std::to_string(privacy_violations) + " seeds with leaks";
  res.determinism_ok = replay_mismatch == 0 && trace_mismatch == 0;
  res.determinism_detail = "sim: " + std::to_string(replay_mismatch) + " replay mismatches over " +
                           std::to_string(seeds) + " chains, " + std::to_string(trace_mismatch) + "/" +
                           std::to_string(trace_repeats) + " repeated runs differ";
  return res;
}

// ---------------------------------------------------------------- authorization

std::string_view payload_name(std::size_t i) {
  static constexpr std::string_view kNames[] = {"SetUser", "CreateNeed", "CreateSupport", "ApproveNeed",
                                                "ApproveSupport"};
  return kNames[i];
}

/// The privilege table, written out independently of the contract code.
bool table_allows(Role caller, std::size_t payload_index) {
  switch (payload_index) {
    case 0: return caller == Role::Admin;
    case 1:
    case 2: return true;
    default: return caller == Role::Checker;
  }
}

std::size_t payload_index(const Payload& p) { return p.index(); }

Outcome authorization() {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(0xA11CE);
  const KeyPair admin = KeyPair::generate();
  const KeyPair checker = KeyPair::generate(), creator = KeyPair::generate(), stranger = KeyPair::generate();
  const KeyPair* keys[] = {&stranger, &admin, &checker, &creator};  // indexed by Role value
  auto base = contract::genesis_state(admin.public_key());
  base.roles[checker.public_key()] = Role::Checker;
  base.roles[creator.public_key()] = Role::Creator;
  base.needs.push_back({0, "food", 1, "kg", stranger.public_key(), contract::Status::WaitingApproval,
                        Digest{}, std::nullopt, 0, std::nullopt});
  base.supports.push_back({0, "tents", 1, "pcs", "road", stranger.public_key(),
                           contract::Status::WaitingApproval, Digest{}, std::nullopt, 0, std::nullopt});
  const Account other = KeyPair::generate().public_key();
  auto sample = [&](std::size_t i) -> Payload {
    switch (i) {
      case 0: return SetUser{other, Role::Creator};
      case 1: return CreateNeed{"water", 5, "l", sha256("r1")};
      case 2: return CreateSupport{"blankets", 9, "pcs", "truck", sha256("r2")};
      case 3: return ApproveNeed{0};
      default: return ApproveSupport{0};
    }
  };

  // 4 roles x 5 payloads, through authorize, apply_payload and a signed transaction.
  std::size_t cells = 0, mismatches = 0;
  std::string first;
  for (Role role : kAllRoles) {
    const auto& key = *keys[static_cast<int>(role)];
    for (std::size_t pi = 0; pi < 5; ++pi) {
      ++cells;
      const bool expect = table_allows(role, pi);
      auto s1 = base;
      const bool by_authorize = !contract::authorize(base, key.public_key(), sample(pi));
      const bool by_apply = !contract::apply_payload(s1, key.public_key(), sample(pi), 1);
      auto s2 = base;
      auto tx = make_transaction(key, contract::expected_nonce(base, key.public_key()), sample(pi));
      const bool by_tx = !ledger::apply_transaction(s2, tx, 1);
      if (by_authorize != expect || by_apply != expect || by_tx != expect) {
        ++mismatches;
        if (first.empty())
          first = std::string(role_label(role)) + " x " + std::string(payload_name(pi));
      }
    }
  }

  // Fuzz: random signed transactions against an evolving state.
  std::vector<KeyPair> actors = {admin, checker, creator, stranger};
  for (int i = 0; i < 4; ++i) actors.push_back(KeyPair::generate());
  auto state = base;
  std::size_t mutated = 0, unjustified = 0, applied = 0;
  auto random_payload = [&]() -> Payload {
    const auto& target = actors[rng() % actors.size()].public_key();
    switch (rng() % 5) {
      case 0: return SetUser{rng() % 8 ? target : Account{}, static_cast<Role>(rng() % 4)};
      case 1: return CreateNeed{rng() % 10 ? "food" : "", rng() % 4, rng() % 10 ? "kg" : "", sha256(std::to_string(rng()))};
      case 2:
        return CreateSupport{"tents", rng() % 4, "pcs", rng() % 5 ? "road" : "", sha256(std::to_string(rng()))};
      case 3: return ApproveNeed{rng() % (state.needs.size() + 2)};
      default: return ApproveSupport{rng() % (state.supports.size() + 2)};
    }
  };
  for (int i = 0; i < 10'000; ++i) {
    const auto& key = actors[rng() % actors.size()];
    auto payload = random_payload();
    auto nonce = contract::expected_nonce(state, key.public_key());
    if (rng() % 10 == 0) nonce += 1 + rng() % 3;
    auto tx = make_transaction(key, nonce, payload);
    const auto pre = state;
    const Role pre_role = contract::get_user_auth(pre, key.public_key());
    auto err = ledger::apply_transaction(state, tx, 2 + static_cast<std::uint64_t>(i));
    if (!err) ++applied;
    if (state != pre) {
      ++mutated;
      const auto pi = payload_index(payload);
      const bool role_rule = pi == 0 ? !contract::require_role(pre, key.public_key(), Role::Admin)
                             : pi >= 3 ? !contract::require_role(pre, key.public_key(), Role::Checker)
                                       : true;  // open creation
      if (err || !role_rule || !table_allows(pre_role, pi) || contract::authorize(pre, key.public_key(), payload))
        ++unjustified;
    }
  }
  out.seconds = since(t0);
  out.ok = mismatches == 0 && unjustified == 0 && mutated > 0;
  out.detail = std::to_string(cells) + "-cell matrix, " + std::to_string(mismatches) + " mismatches" +
               (first.empty() ? "" : " (first: " + first + ")") + "; fuzz 10000 txs, " + std::to_string(applied) +
               " applied, " + std::to_string(mutated) + " mutations, " + std::to_string(unjustified) +
               " without a passing role check";
  return out;
}

// ---------------------------------------------------------------- lifecycle

Outcome lifecycle() {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(0x5EED);
  const KeyPair admin = KeyPair::generate();
  std::vector<KeyPair> actors = {admin, KeyPair::generate(), KeyPair::generate(), KeyPair::generate()};
  std::size_t reverts = 0, gaps = 0, ops = 0, approvals = 0;
  const int histories = 300, steps = 80;
  for (int h = 0; h < histories; ++h) {
    ledger::Ledger l = *ledger::Ledger::from_genesis(
        ledger::make_genesis(admin, {sim::sim_node_id(0)}, 1'000, sim::sim_node_id(0).pubkey));
    auto state = l.state();
    state.roles[actors[1].public_key()] = Role::Checker;
    std::set<std::uint64_t> approved_needs, approved_supports;
    for (int step = 0; step < steps; ++step) {
      const auto& key = actors[rng() % actors.size()];
      Payload p;
      switch (rng() % 6) {
        case 0: p = SetUser{actors[rng() % actors.size()].public_key(), static_cast<Role>(rng() % 4)}; break;
        case 1: p = CreateNeed{"food", 1 + rng() % 9, "kg", sha256(std::to_string(rng()))}; break;
        case 2: p = CreateSupport{"tents", 1 + rng() % 9, "pcs", "road", sha256(std::to_string(rng()))}; break;
        case 3: p = ApproveNeed{rng() % (state.needs.size() + 1)}; break;
        case 4: p = ApproveSupport{rng() % (state.supports.size() + 1)}; break;
        default: p = ApproveNeed{approved_needs.empty() ? 0 : *approved_needs.begin()}; break;  // re-approve
      }
      auto tx = make_transaction(key, contract::expected_nonce(state, key.public_key()), p);
      ++ops;
      ledger::apply_transaction(state, tx, static_cast<std::uint64_t>(step + 1));
      for (auto id : approved_needs)
        if (state.needs[id].status != contract::Status::Approved) ++reverts;
      for (auto id : approved_supports)
        if (state.supports[id].status != contract::Status::Approved) ++reverts;
      for (const auto& n : state.needs)
        if (n.status == contract::Status::Approved) approved_needs.insert(n.need_id);
      for (const auto& s : state.supports)
        if (s.status == contract::Status::Approved) approved_supports.insert(s.support_id);
    }
    for (std::size_t i = 0; i < state.needs.size(); ++i)
      if (state.needs[i].need_id != i) ++gaps;
    for (std::size_t i = 0; i < state.supports.size(); ++i)
      if (state.supports[i].support_id != i) ++gaps;
    approvals += approved_needs.size() + approved_supports.size();
  }
  out.seconds = since(t0);
  out.ok = reverts == 0 && gaps == 0 && approvals > 0;
  out.detail = std::to_string(histories) + " histories, " + std::to_string(ops) + " ops, " +
               std::to_string(approvals) + " approvals, " + std::to_string(reverts) + " reverts, " +
               std::to_string(gaps) + " id gaps";
  return out;
}

// ---------------------------------------------------------------- report

int failures = 0;

void report(const std::string& name, const Outcome& o) {
  if (!o.ok) ++failures;
  std::printf("%s  %-28s %7.1fs  %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.seconds, o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  std::uint64_t seeds = 1000;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--seeds") == 0) seeds = std::stoull(argv[i + 1]);

  auto e2e = run_e2e();
  report("scenario-a-three-nodes", e2e.scenario_a);
  report("scenario-b-five-nodes", e2e.scenario_b);

  auto sweep = run_sweep(seeds);
  report("raft-safety-sweep", sweep.safety);
  report("liveness", sweep.liveness);

  report("authorization", authorization());

  Outcome privacy{e2e.privacy_ok && sweep.privacy_ok, e2e.privacy_detail + "; " + sweep.privacy_detail,
                  sweep.safety.seconds};
  report("privacy-separation", privacy);

  Outcome determinism{e2e.determinism_ok && sweep.determinism_ok,
                      e2e.determinism_detail + "; " + sweep.determinism_detail, 0};
  report("determinism", determinism);

  report("lifecycle-monotonicity", lifecycle());

  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
