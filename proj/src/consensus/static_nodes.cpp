#include "rmsd/consensus/static_nodes.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rmsd::consensus {

std::string render_static_nodes(const StaticNodesConfig& config) {
  if (config.nodes.empty()) return "[]\n";
  std::string out = "[\n";
  for (std::size_t i = 0; i < config.nodes.size(); ++i) {
    out += "  " + nlohmann::json(render_node_uri(config.nodes[i])).dump();
    out += i + 1 < config.nodes.size() ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

Expected<StaticNodesConfig, std::string> parse_static_nodes(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) return fail(std::string("static-nodes: not a JSON array"));
  StaticNodesConfig config;
  std::set<PublicKey> seen;
  for (const auto& item : j) {
    if (!item.is_string()) return fail(std::string("static-nodes: entries must be strings"));
    auto id = parse_node_uri(item.get<std::string>());
    if (!id) return fail("static-nodes: malformed node URI " + item.get<std::string>());
    if (!seen.insert(id->pubkey).second)
      return fail("static-nodes: duplicate public key " + to_hex(id->pubkey));
    config.nodes.push_back(std::move(*id));
  }
  return config;
}

Expected<StaticNodesConfig, std::string> load_static_nodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) return fail("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_static_nodes(ss.str());
}

void save_static_nodes(const std::string& path, const StaticNodesConfig& config) {
  auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << render_static_nodes(config);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rmsd::consensus
