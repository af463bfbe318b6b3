#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cluster_support.hpp"
#include "rmsd/cli/cli.hpp"

using namespace rmsd;
using namespace rmsd::test;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
  json j() const { return json::parse(out); }
};

Run rmsd_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// A network laid out by `init-network`, with nodes started in-process.
struct CliNetwork {
  fs::path root;
  std::vector<std::uint16_t> http, raft;
  std::vector<std::unique_ptr<node::NodeService>> nodes;

  explicit CliNetwork(const std::string& name, std::size_t n = 3)
      : root(fs::temp_directory_path() / ("rmsd-cli-" + name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(root);
    fs::create_directories(root);
    json cfg = {{"admin_key", "admin.key"}, {"nodes", json::array()}};
    for (std::size_t i = 0; i < n; ++i) {
      http.push_back(free_port());
      raft.push_back(free_port());
      cfg["nodes"].push_back({{"data_dir", "n" + std::to_string(i)},
                              {"host", "127.0.0.1"},
                              {"port", http.back()},
                              {"raftport", raft.back()}});
    }
    std::ofstream(root / "network.json") << cfg.dump(2);
  }
  ~CliNetwork() {
    nodes.clear();
    std::error_code ec;
    fs::remove_all(root, ec);
  }

  node::NodeConfig config(std::size_t i) const {
    node::NodeConfig c;
    c.data_dir = root / ("n" + std::to_string(i));
    c.listen = {"127.0.0.1", http[i]};
    c.raft_listen = {"127.0.0.1", raft[i]};
    c.seed = i;
    c.quorum_timeout_ms = 1500;
    c.add_peer_timeout_ms = 3000;
    c.http_threads = 4;
    return c;
  }
  void start(std::size_t i) {
    if (nodes.size() <= i) nodes.resize(i + 1);
    nodes[i] = std::make_unique<node::NodeService>(config(i));
    nodes[i]->start();
  }
  bool wait_for_leader() {
    return wait_until([&] {
      for (auto& n : nodes)
        if (n && n->status().role == consensus::NodeRole::Leader && n->status().quorum) return true;
      return false;
    });
  }
  std::string url(std::size_t i) const { return "http://127.0.0.1:" + std::to_string(http[i]); }
  std::string path(const std::string& p) const { return (root / p).string(); }
};

}  // namespace

TEST_CASE("keygen writes distinct hex keys and a parseable node URI") {
  auto dir = fs::temp_directory_path() / ("rmsd-keygen-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  auto a = rmsd_cli({"keygen", "--out", (dir / "a").string(), "--json", "--port", "9000", "--raftport", "9001"});
  auto b = rmsd_cli({"--json", "keygen", "--out", (dir / "b").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  auto ja = a.j(), jb = b.j();
  CHECK(ja.at("public_key") != jb.at("public_key"));
  CHECK(ja.at("public_key").get<std::string>().size() == 64);
  auto uri = parse_node_uri(ja.at("node_uri").get<std::string>());
  REQUIRE(uri);
  CHECK(to_hex(uri->pubkey) == ja.at("public_key"));
  CHECK(uri->port == 9000);
  CHECK(uri->raftport == 9001);
  CHECK(render_node_uri(*uri) == ja.at("node_uri"));
  CHECK(node::read_key_file(dir / "a.key").public_key() == uri->pubkey);
  std::ifstream pub(dir / "a.pub");
  std::string pub_hex;
  pub >> pub_hex;
  CHECK(pub_hex == ja.at("public_key"));
  // Refuses to overwrite without --force.
  CHECK(rmsd_cli({"keygen", "--out", (dir / "a").string()}).code == cli::kFailure);
  CHECK(rmsd_cli({"keygen", "--out", (dir / "a").string(), "--force"}).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("argument and config errors exit with the validation code") {
  CHECK(rmsd_cli({}).code == cli::kValidation);
  CHECK(rmsd_cli({"frobnicate"}).code == cli::kValidation);
  CHECK(rmsd_cli({"--help"}).code == 0);
  CHECK(rmsd_cli({"init-network", "--config", "/nonexistent/network.json"}).code == cli::kFailure);

  CliNetwork net("badcfg", 2);
  // Duplicate keys: both nodes point at the same key file.
  REQUIRE(rmsd_cli({"keygen", "--out", net.path("dup")}).code == 0);
  json cfg = {{"nodes",
               {{{"data_dir", "x0"}, {"port", 1001}, {"raftport", 1002}, {"key", "dup.key"}},
                {{"data_dir", "x1"}, {"port", 1003}, {"raftport", 1004}, {"key", "dup.key"}}}}};
  std::ofstream(net.path("dup.json")) << cfg.dump();
  auto r = rmsd_cli({"init-network", "--config", net.path("dup.json")});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("InvalidConfig") != std::string::npos);
  CHECK_FALSE(fs::exists(net.path("x0")));
  CHECK_FALSE(fs::exists(net.path("admin.key")));
  std::ofstream(net.path("empty.json")) << R"({"nodes": []})";
  CHECK(rmsd_cli({"init-network", "--config", net.path("empty.json")}).code == cli::kValidation);
  std::ofstream(net.path("garbage.json")) << "{";
  CHECK(rmsd_cli({"init-network", "--config", net.path("garbage.json")}).code == cli::kValidation);

  // Client-side application validation happens before any network call.
  auto bad = rmsd_cli({"--node", "http://127.0.0.1:1", "tx", "create-need", "--category", "food",
                       "--name", "X", "--phone", "1"});
  CHECK(bad.code == cli::kValidation);
  CHECK(bad.err.find("amount") != std::string::npos);
  // Unreachable node.
  auto down = rmsd_cli({"--node", "http://127.0.0.1:" + std::to_string(free_port()), "query", "chain"});
  CHECK(down.code == cli::kUnavailable);
  auto down_json = rmsd_cli({"--json", "--node", "http://127.0.0.1:" + std::to_string(free_port()),
                             "query", "needs"});
  CHECK(down_json.j().at("code") == "Unavailable");
}

TEST_CASE("operator flow: init, grant, apply, approve, query, join") {
  CliNetwork net("flow");
  auto init = rmsd_cli({"--json", "init-network", "--config", net.path("network.json")});
  REQUIRE_MESSAGE(init.code == 0, init.err);
  auto ij = init.j();
  REQUIRE(ij.at("nodes").size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    auto g = node::read_genesis_file(fs::path(net.path("n" + std::to_string(i))) / node::kGenesisFile);
    CHECK(to_hex(g.block_hash) == ij.at("genesis_hash"));
  }
  // Init again over the same dirs is refused.
  CHECK(rmsd_cli({"init-network", "--config", net.path("network.json")}).code == cli::kValidation);

  for (std::size_t i = 0; i < 3; ++i) net.start(i);
  REQUIRE(net.wait_for_leader());
  setenv("RMSD_NODE", net.url(1).c_str(), 1);

  auto chain = rmsd_cli({"--json", "query", "chain"});
  REQUIRE(chain.code == 0);
  CHECK(chain.j().at("height") == 0);
  CHECK(chain.j().at("peers") == 3);
  CHECK(rmsd_cli({"query", "needs"}).out == "(none)\n");

  REQUIRE(rmsd_cli({"keygen", "--out", net.path("checker")}).code == 0);
  auto checker = node::read_key_file(net.path("checker.key"));
  auto grant = rmsd_cli({"tx", "grant", to_hex(checker.public_key()), "checker", "--key", net.path("admin.key")});
  REQUIRE_MESSAGE(grant.code == 0, grant.err);
  CHECK(grant.out.find("Committed") != std::string::npos);
  // A non-admin grant is rejected on chain.
  auto self_grant = rmsd_cli({"tx", "grant", to_hex(checker.public_key()), "admin", "--key", net.path("checker.key")});
  CHECK(self_grant.code == cli::kUnauthorized);
  CHECK(self_grant.out.find("Rejected (Unauthorized)") != std::string::npos);

  auto need = rmsd_cli({"--json", "tx", "create-need", "--category", "food", "--amount", "10",
                        "--unit", "kg", "--name", "Applicant One", "--phone", "555"});
  REQUIRE_MESSAGE(need.code == 0, need.err);
  CHECK(need.j().at("status") == "Committed");
  auto ref = need.j().at("personal_ref").get<std::string>();

  CHECK(rmsd_cli({"query", "status", "need", "0"}).code == cli::kUnauthorized);
  auto st = rmsd_cli({"query", "status", "need", "0", "--key", net.path("checker.key")});
  CHECK(st.code == 0);
  CHECK(st.out == "need 0: waiting for confirmation\n");

  auto approve = rmsd_cli({"tx", "approve", "need", "0", "--key", net.path("checker.key")});
  REQUIRE_MESSAGE(approve.code == 0, approve.err);
  CHECK(approve.out.find("Committed") != std::string::npos);
  auto again = rmsd_cli({"tx", "approve", "need", "0", "--key", net.path("checker.key")});
  CHECK(again.code == cli::kValidation);
  CHECK(again.out.find("AlreadyApproved") != std::string::npos);
  CHECK(rmsd_cli({"tx", "approve", "need", "5", "--key", net.path("checker.key")}).out.find("UnknownId") !=
        std::string::npos);

  // Supports with shipping; only approved ones in the approved list.
  for (auto ship : {"truck", "ferry"}) {
    auto s = rmsd_cli({"tx", "create-support", "--category", "tents", "--amount", "3", "--unit", "pcs",
                       "--shipping", ship, "--name", "Donor", "--address", "Izmir"});
    REQUIRE_MESSAGE(s.code == 0, s.err);
  }
  REQUIRE(rmsd_cli({"tx", "approve", "support", "1", "--key", net.path("checker.key")}).code == 0);
  auto approved = rmsd_cli({"--json", "query", "supports", "--approved"});
  REQUIRE(approved.code == 0);
  auto list = approved.j().at("supports");
  REQUIRE(list.size() == 1);
  CHECK(list[0].at("status") == "approved");
  CHECK(list[0].at("shipping") == "ferry");
  CHECK(rmsd_cli({"--json", "query", "supports"}).j().at("supports").size() == 2);
  auto one = rmsd_cli({"query", "needs", "0"});
  CHECK(one.out.find("[approved]") != std::string::npos);
  CHECK(rmsd_cli({"query", "needs", "7"}).code == cli::kValidation);
  CHECK(rmsd_cli({"query", "wat"}).code == cli::kValidation);

  // Applicant-signed creation.
  REQUIRE(rmsd_cli({"keygen", "--out", net.path("applicant")}).code == 0);
  auto signed_need = rmsd_cli({"--json", "tx", "create-need", "--category", "water", "--amount", "4",
                               "--name", "Self", "--address", "Adana", "--key", net.path("applicant.key")});
  REQUIRE_MESSAGE(signed_need.code == 0, signed_need.err);
  auto n1 = rmsd_cli({"--json", "query", "needs", "1"}).j();
  CHECK(n1.at("creator") == to_hex(node::read_key_file(net.path("applicant.key")).public_key()));

  // Receipt and block lookups.
  auto tx = rmsd_cli({"--json", "query", "tx", need.j().at("tx_id").get<std::string>()});
  CHECK(tx.j().at("status") == "Committed");
  CHECK(rmsd_cli({"query", "tx", to_hex(sha256("x"))}).code == cli::kValidation);
  CHECK(rmsd_cli({"--json", "query", "block", "0"}).j().at("height") == 0);

  // Personal records live on the entry node only.
  CHECK(rmsd_cli({"personal", "get", ref, "--key", net.path("applicant.key")}).code == cli::kUnauthorized);
  auto p = rmsd_cli({"personal", "get", ref, "--key", net.path("checker.key")});
  CHECK(p.code == 0);
  CHECK(p.out.find("Applicant One") != std::string::npos);
  CHECK(rmsd_cli({"--node", net.url(0), "personal", "get", ref, "--key", net.path("checker.key")}).code ==
        cli::kValidation);
  CHECK(rmsd_cli({"personal", "delete", ref, "--key", net.path("admin.key")}).code == 0);
  CHECK(rmsd_cli({"personal", "get", ref, "--key", net.path("checker.key")}).code == cli::kValidation);

  // Join a fourth node through the CLI, then start it from the prepared dir.
  const auto port4 = free_port(), raft4 = free_port();
  REQUIRE(rmsd_cli({"keygen", "--out", net.path("n3node")}).code == 0);
  auto join = rmsd_cli({"--json", "join", "--data-dir", net.path("n3"), "--key", net.path("n3node.key"),
                        "--admin-key", net.path("admin.key"), "--port", std::to_string(port4),
                        "--raftport", std::to_string(raft4), "--static-nodes", net.path("shared-static.json")});
  REQUIRE_MESSAGE(join.code == 0, join.err);
  CHECK(join.j().at("members").size() == 4);
  auto shared = consensus::load_static_nodes(net.path("shared-static.json"));
  REQUIRE(shared);
  CHECK(shared->nodes.size() == 4);
  net.http.push_back(port4);
  net.raft.push_back(raft4);
  net.start(3);
  auto h = net.nodes[0]->snapshot()->height;
  REQUIRE(wait_until([&] { return net.nodes[3]->snapshot()->height >= h; }));
  for (auto& n : net.nodes) CHECK(n->snapshot()->members.size() == 4);

  // Same key again: DuplicatePeer, and nothing written.
  auto dup = rmsd_cli({"join", "--data-dir", net.path("n3b"), "--key", net.path("n3node.key"),
                       "--admin-key", net.path("admin.key"), "--port", "1", "--raftport", "2"});
  CHECK(dup.code == cli::kValidation);
  CHECK(dup.err.find("DuplicatePeer") != std::string::npos);
  CHECK_FALSE(fs::exists(net.path("n3b")));
  // Non-admin key.
  CHECK(rmsd_cli({"join", "--data-dir", net.path("n3c"), "--admin-key", net.path("checker.key"),
                  "--port", "1", "--raftport", "2"})
            .code == cli::kUnauthorized);

  // Without a quorum: NoQuorum and no partial state.
  net.nodes[0].reset();
  net.nodes[2].reset();
  net.nodes[3].reset();
  REQUIRE(wait_until([&] { return !net.nodes[1]->status().quorum; }));
  auto nq = rmsd_cli({"join", "--data-dir", net.path("n4"), "--admin-key", net.path("admin.key"),
                      "--port", "5", "--raftport", "6"});
  CHECK(nq.code == cli::kUnavailable);
  CHECK(nq.err.find("NoQuorum") != std::string::npos);
  CHECK_FALSE(fs::exists(net.path("n4")));
  CHECK(net.nodes[1]->snapshot()->members.size() == 4);
  unsetenv("RMSD_NODE");
}
