#include <algorithm>
#include <random>

#include "rmsd/sim/sim.hpp"

namespace rmsd::sim {

using nlohmann::json;

KeyPair actor_key(const std::string& name) { return KeyPair::from_seed(sha256("rmsd-sim/actor/" + name)); }

KeyPair sim_node_key(std::size_t index) {
  return KeyPair::from_seed(sha256("rmsd-sim/node/" + std::to_string(index)));
}

NodeId sim_node_id(std::size_t index) {
  NodeId id;
  id.pubkey = sim_node_key(index).public_key();
  id.host = "127.0.0.1";
  id.port = static_cast<std::uint16_t>(8545 + index);
  id.raftport = static_cast<std::uint16_t>(50400 + index);
  return id;
}

Block sim_genesis(std::size_t nodes) {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < nodes; ++i) ids.push_back(sim_node_id(i));
  return ledger::make_genesis(actor_key("admin"), ids, 1'600'000'000'000ULL, ids[0].pubkey);
}

namespace {

WorkloadOp grant(std::uint64_t t, std::size_t node, const std::string& target, Role role) {
  WorkloadOp op;
  op.time = t;
  op.node = node;
  op.actor = "admin";
  op.op = OpKind::SetUser;
  op.target = target;
  op.role = role;
  return op;
}

WorkloadOp need(std::uint64_t t, std::size_t node, const std::string& actor, std::string kind,
                std::uint64_t amount, std::string unit) {
  WorkloadOp op;
  op.time = t;
  op.node = node;
  op.actor = actor;
  op.op = OpKind::CreateNeed;
  op.kind = std::move(kind);
  op.amount = amount;
  op.unit = std::move(unit);
  return op;
}

WorkloadOp support(std::uint64_t t, std::size_t node, const std::string& actor, std::string kind,
                   std::uint64_t amount, std::string unit, std::string shipping) {
  auto op = need(t, node, actor, std::move(kind), amount, std::move(unit));
  op.op = OpKind::CreateSupport;
  op.shipping = std::move(shipping);
  return op;
}

WorkloadOp approve(std::uint64_t t, std::size_t node, OpKind kind, std::uint64_t id,
                   std::vector<std::size_t> after) {
  WorkloadOp op;
  op.time = t;
  op.node = node;
  op.actor = "checker";
  op.op = kind;
  op.id = id;
  op.after = std::move(after);
  return op;
}

std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::SetUser: return "set_user";
    case OpKind::CreateNeed: return "create_need";
    case OpKind::CreateSupport: return "create_support";
    case OpKind::ApproveNeed: return "approve_need";
    case OpKind::ApproveSupport: return "approve_support";
  }
  return "?";
}

}  // namespace

std::vector<WorkloadOp> need_flow_workload(std::uint64_t start, std::size_t entry_node) {
  return {
      grant(start, entry_node, "checker", Role::Checker),
      need(start, entry_node, "applicant", "drinking water", 200, "L"),
      approve(start, entry_node, OpKind::ApproveNeed, 0, {0, 1}),
  };
}

std::vector<WorkloadOp> mixed_workload(std::uint64_t seed, std::size_t entry_nodes) {
  std::mt19937_64 rng(seed ^ 0x5EED0F0A11ULL);
  auto t = [&] { return 100 + rng() % 2900; };
  auto n = [&] { return static_cast<std::size_t>(rng() % std::max<std::size_t>(1, entry_nodes)); };
  std::vector<WorkloadOp> ops;
  ops.push_back(grant(t(), n(), "checker", Role::Checker));                   // 0
  ops.push_back(need(t(), n(), "alice", "water", 50, "L"));                   // 1
  ops.push_back(support(t(), n(), "bob", "blankets", 20, "pcs", "truck"));   // 2
  ops.push_back(need(t(), n(), "carol", "tents", 4, "pcs"));                  // 3
  ops.push_back(approve(t(), n(), OpKind::ApproveNeed, 0, {0, 1}));           // 4
  ops.push_back(approve(t(), n(), OpKind::ApproveSupport, 0, {0, 2}));        // 5
  ops.push_back(support(t(), n(), "dave", "food", 100, "kg", "air cargo"));  // 6
  ops.push_back(approve(t(), n(), OpKind::ApproveNeed, 1, {0, 1, 3}));        // 7
  ops.push_back(approve(t(), n(), OpKind::ApproveSupport, 1, {0, 2, 6}));     // 8
  ops.push_back(grant(t(), n(), "creator", Role::Creator));                   // 9
  return ops;
}

std::vector<Fault> random_faults(std::uint64_t seed, std::size_t nodes) {
  std::mt19937_64 rng(seed ^ 0xFA017ULL);
  auto between = [&](std::uint64_t lo, std::uint64_t hi) { return lo + rng() % (hi - lo + 1); };
  std::vector<Fault> out;
  std::uint64_t last = 0;
  auto episodes = between(2, 6);
  for (std::uint64_t k = 0; k < episodes; ++k) {
    auto start = between(200, 3500);
    auto stop = start + between(150, 1500);
    last = std::max(last, stop);
    std::vector<std::size_t> order(nodes);
    for (std::size_t i = 0; i < nodes; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    switch (rng() % 4) {
      case 0:    // arbitrary split
      case 1: {  // or a cut-off minority, which strands leaders with uncommitted blocks
        if (nodes < 2) break;
        auto cut = rng() % 4 == 0 ? between(1, nodes - 1) : between(1, std::max<std::size_t>(1, (nodes - 1) / 2));
        Fault p;
        p.time = start;
        p.kind = FaultKind::Partition;
        p.side_a.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
        p.side_b.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
        std::sort(p.side_a.begin(), p.side_a.end());
        std::sort(p.side_b.begin(), p.side_b.end());
        out.push_back(p);
        out.push_back(Fault{stop, FaultKind::Heal});
        break;
      }
      case 2: {
        auto count = nodes > 2 ? between(1, 2) : 1;
        for (std::size_t c = 0; c < count; ++c) {
          Fault f;
          f.time = start + c * between(0, 100);
          f.kind = FaultKind::Crash;
          f.node = order[c];
          out.push_back(f);
          f.time = stop + c * between(0, 100);
          f.kind = FaultKind::Restart;
          out.push_back(f);
          last = std::max(last, f.time);
        }
        break;
      }
      default: {
        Fault d;
        d.time = start;
        d.kind = FaultKind::Drop;
        d.probability = static_cast<double>(between(5, 30)) / 100.0;
        d.duration = stop - start;
        out.push_back(d);
        break;
      }
    }
  }
  // Everything heals and every node is back by the end of the schedule.
  out.push_back(Fault{last + 1, FaultKind::Heal});
  for (std::size_t i = 0; i < nodes; ++i) {
    Fault r;
    r.time = last + 1;
    r.kind = FaultKind::Restart;
    r.node = i;
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const Fault& a, const Fault& b) { return a.time < b.time; });
  return out;
}

nlohmann::json faults_to_json(const std::vector<Fault>& faults) {
  json arr = json::array();
  for (const auto& f : faults) {
    json j = {{"time", f.time}};
    switch (f.kind) {
      case FaultKind::Partition:
        j["kind"] = "partition";
        j["a"] = f.side_a;
        j["b"] = f.side_b;
        break;
      case FaultKind::Heal: j["kind"] = "heal"; break;
      case FaultKind::Crash:
        j["kind"] = "crash";
        j["node"] = f.node;
        break;
      case FaultKind::Restart:
        j["kind"] = "restart";
        j["node"] = f.node;
        break;
      case FaultKind::Drop:
        j["kind"] = "drop";
        j["p"] = f.probability;
        j["duration"] = f.duration;
        break;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<Fault> faults_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("faults: expected a JSON array");
  std::vector<Fault> out;
  for (const auto& item : j) {
    Fault f;
    f.time = item.at("time").get<std::uint64_t>();
    auto kind = item.at("kind").get<std::string>();
    if (kind == "partition") {
      f.kind = FaultKind::Partition;
      f.side_a = item.at("a").get<std::vector<std::size_t>>();
      f.side_b = item.at("b").get<std::vector<std::size_t>>();
    } else if (kind == "heal") {
      f.kind = FaultKind::Heal;
    } else if (kind == "crash" || kind == "restart") {
      f.kind = kind == "crash" ? FaultKind::Crash : FaultKind::Restart;
      f.node = item.at("node").get<std::size_t>();
    } else if (kind == "drop") {
      f.kind = FaultKind::Drop;
      f.probability = item.at("p").get<double>();
      f.duration = item.at("duration").get<std::uint64_t>();
      if (f.probability < 0 || f.probability > 1)
        throw std::invalid_argument("faults: drop probability must be within [0, 1]");
    } else {
      throw std::invalid_argument("faults: unknown kind " + kind);
    }
    out.push_back(std::move(f));
  }
  return out;
}

nlohmann::json workload_to_json(const std::vector<WorkloadOp>& ops) {
  json arr = json::array();
  for (const auto& op : ops) {
    json j = {{"time", op.time}, {"node", op.node}, {"actor", op.actor}, {"op", op_name(op.op)}};
    if (op.nonce) j["nonce"] = *op.nonce;
    switch (op.op) {
      case OpKind::SetUser:
        j["target"] = op.target;
        j["role"] = role_label(op.role);
        break;
      case OpKind::CreateSupport: j["shipping"] = op.shipping; [[fallthrough]];
      case OpKind::CreateNeed:
        j["kind"] = op.kind;
        j["amount"] = op.amount;
        j["unit"] = op.unit;
        break;
      case OpKind::ApproveNeed:
      case OpKind::ApproveSupport: j["id"] = op.id; break;
    }
    if (!op.after.empty()) j["after"] = op.after;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<WorkloadOp> workload_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("workload: expected a JSON array");
  std::vector<WorkloadOp> out;
  for (const auto& item : j) {
    WorkloadOp op;
    op.time = item.value("time", std::uint64_t{0});
    op.node = item.value("node", std::size_t{0});
    op.actor = item.at("actor").get<std::string>();
    if (item.contains("nonce")) op.nonce = item.at("nonce").get<std::uint64_t>();
    op.after = item.value("after", std::vector<std::size_t>{});
    auto name = item.at("op").get<std::string>();
    if (name == "set_user") {
      op.op = OpKind::SetUser;
      op.target = item.at("target").get<std::string>();
      auto role = parse_role(item.at("role").get<std::string>());
      if (!role) throw std::invalid_argument("workload: unknown role");
      op.role = *role;
    } else if (name == "create_need" || name == "create_support") {
      op.op = name == "create_need" ? OpKind::CreateNeed : OpKind::CreateSupport;
      op.kind = item.at("kind").get<std::string>();
      op.amount = item.at("amount").get<std::uint64_t>();
      op.unit = item.value("unit", std::string{});
      if (op.op == OpKind::CreateSupport) op.shipping = item.at("shipping").get<std::string>();
    } else if (name == "approve_need" || name == "approve_support") {
      op.op = name == "approve_need" ? OpKind::ApproveNeed : OpKind::ApproveSupport;
      op.id = item.at("id").get<std::uint64_t>();
    } else {
      throw std::invalid_argument("workload: unknown op " + name);
    }
    out.push_back(std::move(op));
  }
  return out;
}

}  // namespace rmsd::sim
