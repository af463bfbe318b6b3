#include "rmsd/node/bootstrap.hpp"

#include <fstream>
#include <set>

#include "rmsd/consensus/static_nodes.hpp"
#include "rmsd/ledger.hpp"
#include "rmsd/node/service.hpp"

namespace rmsd::node {

namespace fs = std::filesystem;

namespace {

bool dir_is_free(const fs::path& dir) {
  return !fs::exists(dir / kGenesisFile) && !fs::exists(dir / kRaftLogFile);
}

}  // namespace

Expected<Block, std::string> init_network(const KeyPair& admin, const std::vector<NodeSpec>& nodes,
                                          std::uint64_t timestamp) {
  if (nodes.empty()) return fail(std::string("InvalidConfig: at least one node is required"));
  std::set<PublicKey> keys;
  std::set<std::string> endpoints, dirs;
  for (const auto& n : nodes) {
    if (n.key.public_key() != n.id.pubkey)
      return fail(std::string("InvalidConfig: node id does not match its key"));
    if (!keys.insert(n.id.pubkey).second)
      return fail("InvalidConfig: duplicate public key " + to_hex(n.id.pubkey));
    if (n.id.port == 0 || n.id.raftport == 0 || n.id.host.empty())
      return fail("InvalidConfig: node " + short_name(n.id.pubkey) + " needs host, port and raftport");
    for (auto port : {n.id.port, n.id.raftport})
      if (!endpoints.insert(n.id.host + ":" + std::to_string(port)).second)
        return fail("InvalidConfig: endpoint " + n.id.host + ":" + std::to_string(port) +
                    " used twice");
    auto dir = fs::weakly_canonical(fs::absolute(n.data_dir)).string();
    if (!dirs.insert(dir).second) return fail("InvalidConfig: data dir " + dir + " used twice");
    if (!dir_is_free(n.data_dir))
      return fail("InvalidConfig: " + n.data_dir.string() + " already holds a node");
  }

  std::vector<NodeId> members;
  for (const auto& n : nodes) members.push_back(n.id);
  auto genesis = ledger::make_genesis(admin, members, timestamp, nodes.front().id.pubkey);
  if (!ledger::Ledger::from_genesis(genesis))
    return fail(std::string("InvalidConfig: genesis block failed validation"));

  const consensus::StaticNodesConfig static_nodes{members};
  for (const auto& n : nodes) {
    fs::create_directories(n.data_dir);
    write_key_file(n.data_dir / kNodeKeyFile, n.key);
    write_genesis_file(n.data_dir / kGenesisFile, genesis);
    consensus::save_static_nodes((n.data_dir / kStaticNodesFile).string(), static_nodes);
  }
  return genesis;
}

Expected<fs::path, std::string> prepare_join_dir(const fs::path& data_dir, const KeyPair& key,
                                                 const Block& genesis,
                                                 const std::string& static_nodes) {
  if (!dir_is_free(data_dir)) return fail(data_dir.string() + " already holds a node");
  auto parsed = consensus::parse_static_nodes(static_nodes);
  if (!parsed) return fail("static nodes: " + parsed.error());
  fs::create_directories(data_dir);
  write_key_file(data_dir / kNodeKeyFile, key);
  write_genesis_file(data_dir / kGenesisFile, genesis);
  consensus::save_static_nodes((data_dir / kStaticNodesFile).string(), *parsed);
  return data_dir;
}

}  // namespace rmsd::node
