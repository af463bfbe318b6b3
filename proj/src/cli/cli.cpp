#include "rmsd/cli/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rmsd/consensus/static_nodes.hpp"
#include "rmsd/node/bootstrap.hpp"
#include "rmsd/node/client.hpp"
#include "rmsd/node/service.hpp"

namespace rmsd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDefaultNode = "http://127.0.0.1:8545";

/// A command failure carrying its exit code.
struct Failure {
  int code;
  std::string error;  // short code, e.g. ValidationError
  std::string message;
};

int exit_code_for(const node::ApiResponse& r) {
  if (r.unreachable() || r.status == 503) return kUnavailable;
  if (r.status == 401 || r.status == 403) return kUnauthorized;
  if (r.status >= 400 && r.status < 500) return kValidation;
  return kFailure;
}

Failure api_failure(const node::ApiResponse& r) {
  return {exit_code_for(r), r.error_code(), r.error_message()};
}

KeyPair load_key(const std::string& path) {
  try {
    return node::read_key_file(path);
  } catch (const std::exception& e) {
    throw Failure{kFailure, "IOError", e.what()};
  }
}

std::uint64_t unix_ms_now() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool json_output = false;
  std::string endpoint;
  double timeout_s = 30;

  node::ApiClient client() const {
    return node::ApiClient(endpoint, std::chrono::milliseconds(
                                         static_cast<std::int64_t>(timeout_s * 1000) + 5000));
  }
  void emit(const json& j, const std::string& human) const {
    if (json_output) out << j.dump() << "\n";
    else out << human;
  }
};

// ---------------------------------------------------------------------------
// keygen

struct KeygenOpts {
  std::string out_prefix;
  std::string host = "127.0.0.1";
  std::uint16_t port = 8545, raftport = 50400;
  bool force = false;
};

int cmd_keygen(const Context& ctx, const KeygenOpts& o) {
  fs::path key_path = o.out_prefix + ".key", pub_path = o.out_prefix + ".pub";
  if (!o.force && (fs::exists(key_path) || fs::exists(pub_path)))
    throw Failure{kFailure, "IOError", key_path.string() + " exists (use --force to overwrite)"};
  auto key = KeyPair::generate();
  try {
    if (key_path.has_parent_path()) fs::create_directories(key_path.parent_path());
    node::write_key_file(key_path, key);
    std::ofstream pub(pub_path, std::ios::trunc);
    pub << to_hex(key.public_key()) << "\n";
    if (!pub) throw std::runtime_error("cannot write " + pub_path.string());
  } catch (const std::exception& e) {
    throw Failure{kFailure, "IOError", e.what()};
  }
  auto uri = render_node_uri(NodeId{key.public_key(), o.host, o.port, o.raftport});
  ctx.emit({{"public_key", to_hex(key.public_key())},
            {"key_file", key_path.string()},
            {"public_file", pub_path.string()},
            {"node_uri", uri}},
           "public key  " + to_hex(key.public_key()) + "\nkey file    " + key_path.string() +
               "\nnode uri    " + uri + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------
// init-network

int cmd_init_network(const Context& ctx, const std::string& config_path) {
  json cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw Failure{kFailure, "IOError", "cannot read " + config_path};
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw Failure{kValidation, "InvalidConfig", std::string("config is not valid JSON: ") + e.what()};
  }
  const fs::path base = fs::path(config_path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  auto invalid = [](const std::string& m) { return Failure{kValidation, "InvalidConfig", m}; };

  try {
    if (!cfg.is_object() || !cfg.contains("nodes") || !cfg.at("nodes").is_array())
      throw invalid("config needs a \"nodes\" array");
    std::optional<KeyPair> admin;
    fs::path admin_path = resolve(cfg.value("admin_key", std::string("admin.key")));
    if (fs::exists(admin_path)) admin = load_key(admin_path.string());
    else admin = KeyPair::generate();

    std::vector<node::NodeSpec> specs;
    for (const auto& n : cfg.at("nodes")) {
      if (!n.contains("data_dir") || !n.contains("port") || !n.contains("raftport"))
        throw invalid("each node needs data_dir, port and raftport");
      auto key = n.contains("key") ? load_key(resolve(n.at("key").get<std::string>()).string())
                                   : KeyPair::generate();
      NodeId id{key.public_key(), n.value("host", std::string("127.0.0.1")),
                n.at("port").get<std::uint16_t>(), n.at("raftport").get<std::uint16_t>()};
      specs.push_back({key, id, resolve(n.at("data_dir").get<std::string>())});
    }
    std::uint64_t ts = cfg.contains("timestamp") ? cfg.at("timestamp").get<std::uint64_t>()
                                                 : unix_ms_now();
    auto genesis = node::init_network(*admin, specs, ts);
    if (!genesis) throw invalid(genesis.error().substr(genesis.error().find(':') + 2));
    if (!fs::exists(admin_path)) node::write_key_file(admin_path, *admin);

    json nodes = json::array();
    std::string human = "genesis     " + to_hex(genesis->block_hash) + "\nadmin       " +
                        to_hex(admin->public_key()) + " (" + admin_path.string() + ")\n";
    for (const auto& s : specs) {
      nodes.push_back({{"data_dir", s.data_dir.string()}, {"node_uri", render_node_uri(s.id)}});
      human += "node        " + s.data_dir.string() + "  " + render_node_uri(s.id) + "\n";
    }
    ctx.emit({{"genesis_hash", to_hex(genesis->block_hash)},
              {"admin", to_hex(admin->public_key())},
              {"admin_key", admin_path.string()},
              {"nodes", nodes}},
             human);
  } catch (const json::exception& e) {
    throw invalid(e.what());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// join

struct JoinOpts {
  std::string data_dir, key_path, admin_key, static_nodes;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0, raftport = 0;
};

int cmd_join(const Context& ctx, const JoinOpts& o) {
  auto admin = load_key(o.admin_key);
  auto key = o.key_path.empty() ? KeyPair::generate() : load_key(o.key_path);
  NodeId id{key.public_key(), o.host, o.port, o.raftport};
  if (fs::exists(fs::path(o.data_dir) / node::kGenesisFile))
    throw Failure{kValidation, "ValidationError", o.data_dir + " already holds a node"};
  if (!ctx.json_output) ctx.out << "candidate   " << render_node_uri(id) << "\n";

  auto client = ctx.client();
  auto g = client.get("/v1/blocks/0");
  if (!g.ok()) throw api_failure(g);
  auto raw = from_base64(g.body.at("raw").get<std::string>());
  if (!raw) throw Failure{kFailure, "ProtocolError", "genesis is not base64"};
  auto genesis = decode_block(*raw);
  if (hash_block(genesis) != genesis.block_hash)
    throw Failure{kFailure, "ProtocolError", "genesis hash mismatch"};

  auto added = client.add_peer(id, admin);
  if (!added.ok()) throw api_failure(added);
  const auto static_text = added.body.at("static_nodes").get<std::string>();
  auto dir = node::prepare_join_dir(o.data_dir, key, genesis, static_text);
  if (!dir) throw Failure{kFailure, "IOError", dir.error()};
  if (!o.static_nodes.empty()) {
    auto parsed = consensus::parse_static_nodes(static_text);
    consensus::save_static_nodes(o.static_nodes, *parsed);
  }
  ctx.emit({{"node_uri", render_node_uri(id)},
            {"height", added.body.at("height")},
            {"members", added.body.at("members")},
            {"data_dir", o.data_dir}},
           "admitted at height " + added.body.at("height").dump() + "; " +
               std::to_string(added.body.at("members").size()) + " members\ndata dir    " +
               o.data_dir + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------
// tx

struct TxOpts {
  std::string key_path;
  bool no_wait = false;
  // create-*
  std::string category, unit, shipping, name, phone, address, notes;
  std::uint64_t amount = 0;
  bool amount_set = false;
  // approve
  std::string kind;
  std::uint64_t id = 0;
  // grant
  std::string account, role;
};

int finish_receipt(const Context& ctx, node::ApiClient& client, const node::ApiResponse& submitted,
                   bool no_wait) {
  if (!submitted.ok()) throw api_failure(submitted);
  auto receipt = submitted;
  if (!no_wait && receipt.body.value("status", "") == "Pending") {
    auto id = fixed_from_hex<32>(receipt.body.at("tx_id").get<std::string>());
    receipt = client.wait_receipt(*id, std::chrono::milliseconds(
                                           static_cast<std::int64_t>(ctx.timeout_s * 1000)));
    if (!receipt.ok()) throw api_failure(receipt);
  }
  const auto status = receipt.body.value("status", "");
  std::string human = "tx " + receipt.body.value("tx_id", "") + " " + status;
  if (status == "Committed") human += " at height " + receipt.body.at("height").dump();
  if (status == "Rejected") human += " (" + receipt.body.value("reason", "") + ")";
  if (receipt.body.contains("personal_ref"))
    human += "\npersonal_ref " + receipt.body.at("personal_ref").get<std::string>();
  ctx.emit(receipt.body, human + "\n");
  if (status == "Rejected")
    return receipt.body.value("reason", "") == "Unauthorized" ? kUnauthorized : kValidation;
  if (status == "Pending" && !no_wait) {
    ctx.err << "error: Unavailable: still pending after " << ctx.timeout_s << "s\n";
    return kUnavailable;
  }
  return kOk;
}

int cmd_create(const Context& ctx, const TxOpts& o, contract::RecordKind kind) {
  json app = {{"kind", kind == contract::RecordKind::Need ? "need" : "support"},
              {"category", o.category},
              {"unit", o.unit},
              {"personal", json::object()}};
  if (o.amount_set) app["amount"] = o.amount;
  if (kind == contract::RecordKind::Support) app["shipping"] = o.shipping;
  for (auto [field, value] : {std::pair{"name", &o.name}, {"phone", &o.phone},
                              {"address", &o.address}, {"notes", &o.notes}})
    if (!value->empty()) app["personal"][field] = *value;
  // Same rules the node applies; nothing is sent if they fail.
  auto parsed = api::parse_application(app);
  if (!parsed) throw Failure{kValidation, "ValidationError", parsed.error()};

  auto client = ctx.client();
  if (o.key_path.empty()) return finish_receipt(ctx, client, client.post("/v1/applications", app), o.no_wait);

  auto key = load_key(o.key_path);
  auto nonce = client.next_nonce(key.public_key());
  if (!nonce) throw api_failure(client.get("/v1/accounts/" + to_hex(key.public_key())));
  Payload payload;
  auto ref = privacy::new_personal_ref();
  if (kind == contract::RecordKind::Need)
    payload = CreateNeed{parsed->category, parsed->amount, parsed->unit, ref};
  else
    payload = CreateSupport{parsed->category, parsed->amount, parsed->unit, parsed->shipping, ref};
  auto tx = make_transaction(key, *nonce, payload);
  return finish_receipt(ctx, client, client.submit_signed_application(tx, parsed->personal), o.no_wait);
}

int cmd_approve(const Context& ctx, const TxOpts& o) {
  auto key = load_key(o.key_path);
  Payload payload;
  if (o.kind == "need") payload = ApproveNeed{o.id};
  else if (o.kind == "support") payload = ApproveSupport{o.id};
  else throw Failure{kValidation, "ValidationError", "kind must be need or support"};
  auto client = ctx.client();
  auto nonce = client.next_nonce(key.public_key());
  if (!nonce) throw api_failure(client.get("/v1/accounts/" + to_hex(key.public_key())));
  return finish_receipt(ctx, client, client.submit_approval(make_transaction(key, *nonce, payload)),
                        o.no_wait);
}

int cmd_grant(const Context& ctx, const TxOpts& o) {
  auto key = load_key(o.key_path);
  auto target = fixed_from_hex<32>(o.account);
  if (!target) throw Failure{kValidation, "ValidationError", "account must be 64 hex chars"};
  auto role = parse_role(o.role);
  if (!role) throw Failure{kValidation, "ValidationError", "role must be one of none, admin, checker, creator"};
  auto client = ctx.client();
  auto nonce = client.next_nonce(key.public_key());
  if (!nonce) throw api_failure(client.get("/v1/accounts/" + to_hex(key.public_key())));
  return finish_receipt(
      ctx, client, client.submit_role(make_transaction(key, *nonce, SetUser{*target, *role})),
      o.no_wait);
}

// ---------------------------------------------------------------------------
// query / personal

std::string record_line(const json& r) {
  std::ostringstream s;
  s << std::left << std::setw(4) << r.at("id").dump() << "  " << r.at("kind").get<std::string>()
    << "  " << r.at("amount").dump() << " " << r.at("unit").get<std::string>();
  if (r.contains("shipping")) s << "  shipping: " << r.at("shipping").get<std::string>();
  s << "  [" << r.at("status").get<std::string>() << "]\n";
  return s.str();
}

int cmd_query(const Context& ctx, const std::string& what, const std::vector<std::string>& args,
              bool approved, const std::string& key_path) {
  auto client = ctx.client();
  std::optional<KeyPair> key;
  if (!key_path.empty()) key = load_key(key_path);
  const KeyPair* auth = key ? &*key : nullptr;

  auto fetch = [&](const std::string& path) {
    auto r = client.get(path, auth);
    if (!r.ok()) throw api_failure(r);
    return r;
  };
  auto list = [&](const std::string& path, const char* field) {
    auto r = fetch(path);
    std::string human;
    for (const auto& item : r.body.at(field)) human += record_line(item);
    if (human.empty()) human = "(none)\n";
    ctx.emit(r.body, human);
    return kOk;
  };
  auto need_args = [&](std::size_t n, const char* usage) {
    if (args.size() != n) throw Failure{kValidation, "ValidationError", std::string("usage: rmsd query ") + usage};
  };

  if (what == "needs" || what == "supports") {
    if (args.size() > 1) throw Failure{kValidation, "ValidationError", "at most one id"};
    if (args.size() == 1) {
      auto r = fetch("/v1/" + what + "/" + args[0]);
      ctx.emit(r.body, record_line(r.body));
      return kOk;
    }
    if (what == "supports" && approved) return list("/v1/supports/approved", "supports");
    return list("/v1/" + what, what.c_str());
  }
  if (what == "status") {
    need_args(2, "status <need|support> <id>");
    auto r = fetch("/v1/status/" + args[0] + "/" + args[1]);
    ctx.emit(r.body, args[0] + " " + args[1] + ": " + r.body.at("status").get<std::string>() + "\n");
    return kOk;
  }
  if (what == "chain") {
    auto r = fetch("/v1/chain");
    const auto& b = r.body;
    ctx.emit(b, "height      " + b.at("height").dump() + "\ntip         " +
                    b.at("tip").get<std::string>() + "\nstate       " +
                    b.at("state_digest").get<std::string>() + "\nleader      " +
                    (b.at("leader").is_null() ? "none" : b.at("leader").get<std::string>()) +
                    "\npeers       " + b.at("peers").dump() + "\n");
    return kOk;
  }
  if (what == "tx") {
    need_args(1, "tx <tx-id>");
    auto r = fetch("/v1/tx/" + args[0]);
    std::string human = r.body.at("status").get<std::string>();
    if (r.body.contains("height")) human += " at height " + r.body.at("height").dump();
    if (r.body.contains("reason")) human += " (" + r.body.at("reason").get<std::string>() + ")";
    ctx.emit(r.body, human + "\n");
    return kOk;
  }
  if (what == "block") {
    need_args(1, "block <height>");
    auto r = fetch("/v1/blocks/" + args[0]);
    ctx.emit(r.body, "height " + r.body.at("height").dump() + "  hash " +
                         r.body.at("hash").get<std::string>() + "  txs " +
                         std::to_string(r.body.at("transactions").size()) + "\n");
    return kOk;
  }
  throw Failure{kValidation, "ValidationError",
                "unknown query '" + what + "' (needs, supports, status, chain, tx, block)"};
}

int cmd_personal(const Context& ctx, const std::string& action, const std::string& ref,
                 const std::string& key_path) {
  auto key = load_key(key_path);
  auto client = ctx.client();
  auto path = "/v1/personal/" + ref;
  auto r = action == "delete" ? client.del(path, &key) : client.get(path, &key);
  if (!r.ok()) throw api_failure(r);
  if (action == "delete") {
    ctx.emit(r.body, "deleted " + ref + "\n");
  } else {
    std::string human;
    for (auto field : {"name", "phone", "address", "notes"})
      human += std::string(field) + ": " + r.body.value(field, "") + "\n";
    ctx.emit(r.body, human);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rmsd: operator tooling for the relief ledger network", "rmsd"};
  app.require_subcommand(1);
  app.fallthrough();

  const char* env_node = std::getenv("RMSD_NODE");
  Context ctx{out, err, false, env_node && *env_node ? env_node : kDefaultNode};
  app.add_option("--node", ctx.endpoint, "Node endpoint (default: $RMSD_NODE or " + std::string(kDefaultNode) + ")");
  app.add_flag("--json", ctx.json_output, "Machine-readable output");
  app.add_option("--timeout", ctx.timeout_s, "Seconds to wait for commits");

  KeygenOpts kg;
  auto* keygen = app.add_subcommand("keygen", "Generate a key pair (<prefix>.key, <prefix>.pub)");
  keygen->add_option("--out", kg.out_prefix, "Output path prefix")->required();
  keygen->add_option("--host", kg.host, "Host for the printed node URI");
  keygen->add_option("--port", kg.port, "HTTP port for the printed node URI");
  keygen->add_option("--raftport", kg.raftport, "Consensus port for the printed node URI");
  keygen->add_flag("--force", kg.force, "Overwrite existing files");

  std::string init_config;
  auto* init = app.add_subcommand("init-network", "Create genesis and data dirs for a new network");
  init->add_option("--config", init_config, "Network description (JSON)")->required();

  JoinOpts jo;
  auto* join = app.add_subcommand("join", "Admit a new node and prepare its data dir");
  join->add_option("--data-dir", jo.data_dir, "Data dir for the new node")->required();
  join->add_option("--key", jo.key_path, "Node key file (generated when omitted)");
  join->add_option("--admin-key", jo.admin_key, "Admin key authorizing the change")->required();
  join->add_option("--host", jo.host, "Host the new node listens on");
  join->add_option("--port", jo.port, "HTTP port of the new node")->required();
  join->add_option("--raftport", jo.raftport, "Consensus port of the new node")->required();
  join->add_option("--static-nodes", jo.static_nodes, "Also rewrite this static-nodes.json");

  TxOpts to;
  auto* tx = app.add_subcommand("tx", "Submit transactions");
  tx->require_subcommand(1);
  auto add_create = [&](const char* name, const char* desc, bool support) {
    auto* c = tx->add_subcommand(name, desc);
    c->add_option("--category", to.category, "What is needed or offered")->required();
    c->add_option("--amount", to.amount, "Positive quantity")->each([&](const std::string&) { to.amount_set = true; });
    c->add_option("--unit", to.unit, "Unit of the amount");
    if (support) c->add_option("--shipping", to.shipping, "Shipping type");
    c->add_option("--name", to.name, "Applicant name (kept off-chain)");
    c->add_option("--phone", to.phone, "Applicant phone (kept off-chain)");
    c->add_option("--address", to.address, "Applicant address (kept off-chain)");
    c->add_option("--notes", to.notes, "Free-form notes (kept off-chain)");
    c->add_option("--key", to.key_path, "Sign as this applicant instead of the node");
    c->add_flag("--no-wait", to.no_wait, "Return the Pending receipt immediately");
    return c;
  };
  auto* create_need = add_create("create-need", "Apply for a need", false);
  auto* create_support = add_create("create-support", "Offer support", true);
  auto* approve = tx->add_subcommand("approve", "Approve a need or support (checker)");
  approve->add_option("kind", to.kind, "need or support")->required();
  approve->add_option("id", to.id, "Record id")->required();
  approve->add_option("--key", to.key_path, "Checker key")->required();
  approve->add_flag("--no-wait", to.no_wait, "Return the Pending receipt immediately");
  auto* grant = tx->add_subcommand("grant", "Assign a role (admin)");
  grant->add_option("account", to.account, "Account public key (hex)")->required();
  grant->add_option("role", to.role, "none, admin, checker or creator")->required();
  grant->add_option("--key", to.key_path, "Admin key")->required();
  grant->add_flag("--no-wait", to.no_wait, "Return the Pending receipt immediately");

  std::string query_what, query_key;
  std::vector<std::string> query_args;
  bool approved_only = false;
  auto* query = app.add_subcommand("query", "Read chain state");
  query->add_option("what", query_what, "needs, supports, status, chain, tx or block")->required();
  query->add_option("args", query_args, "Ids for the query");
  query->add_flag("--approved", approved_only, "supports: only approved ones");
  query->add_option("--key", query_key, "Sign the request (status needs a checker key)");

  std::string personal_action, personal_ref, personal_key;
  auto* personal = app.add_subcommand("personal", "Access node-local personal records");
  personal->add_option("action", personal_action, "get or delete")
      ->required()
      ->check(CLI::IsMember({"get", "delete"}));
  personal->add_option("ref", personal_ref, "personal_ref (hex)")->required();
  personal->add_option("--key", personal_key, "Checker (get) or admin (delete) key")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidation;
  }

  try {
    if (*keygen) return cmd_keygen(ctx, kg);
    if (*init) return cmd_init_network(ctx, init_config);
    if (*join) return cmd_join(ctx, jo);
    if (*create_need) return cmd_create(ctx, to, contract::RecordKind::Need);
    if (*create_support) return cmd_create(ctx, to, contract::RecordKind::Support);
    if (*approve) return cmd_approve(ctx, to);
    if (*grant) return cmd_grant(ctx, to);
    if (*query) return cmd_query(ctx, query_what, query_args, approved_only, query_key);
    if (*personal) return cmd_personal(ctx, personal_action, personal_ref, personal_key);
  } catch (const Failure& f) {
    if (ctx.json_output) out << json{{"code", f.error}, {"message", f.message}}.dump() << "\n";
    err << "error: " << f.error << ": " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace rmsd::cli
