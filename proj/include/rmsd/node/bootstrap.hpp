#pragma once

// Creating data directories for a new network or a joining node.

#include <filesystem>
#include <string>
#include <vector>

#include "rmsd/block.hpp"
#include "rmsd/expected.hpp"

namespace rmsd::node {

struct NodeSpec {
  KeyPair key;
  NodeId id;
  std::filesystem::path data_dir;
};

/// Validates the whole set first, then writes node.key, genesis.block and
/// static-nodes.json into every data dir. The first node proposes genesis.
/// Errors (InvalidConfig) leave the filesystem untouched.
Expected<Block, std::string> init_network(const KeyPair& admin, const std::vector<NodeSpec>& nodes,
                                          std::uint64_t timestamp);

/// Data dir for a node admitted to an existing network.
Expected<std::filesystem::path, std::string> prepare_join_dir(const std::filesystem::path& data_dir,
                                                              const KeyPair& key,
                                                              const Block& genesis,
                                                              const std::string& static_nodes);

}  // namespace rmsd::node
