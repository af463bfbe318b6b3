#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rmsd/expected.hpp"
#include "rmsd/node_id.hpp"

namespace rmsd::consensus {

/// Contents of static-nodes.json: the member list every node shares.
struct StaticNodesConfig {
  std::vector<NodeId> nodes;
  bool operator==(const StaticNodesConfig&) const = default;
};

/// JSON array of rnode URIs, two-space indented, one entry per line, trailing newline.
std::string render_static_nodes(const StaticNodesConfig& config);
/// Rejects malformed URIs and duplicate public keys.
Expected<StaticNodesConfig, std::string> parse_static_nodes(std::string_view text);

Expected<StaticNodesConfig, std::string> load_static_nodes(const std::string& path);
/// Writes atomically (temp file + rename).
void save_static_nodes(const std::string& path, const StaticNodesConfig& config);

}  // namespace rmsd::consensus
