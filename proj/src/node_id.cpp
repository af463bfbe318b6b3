#include "rmsd/node_id.hpp"

#include <charconv>

namespace rmsd {
namespace {

constexpr std::string_view kScheme = "rnode://";
constexpr std::string_view kRaftParam = "?raftport=";

// Strict decimal port: no sign, no leading zeros, 1..65535.
std::optional<std::uint16_t> parse_port(std::string_view s) {
  if (s.empty() || s.size() > 5 || s[0] == '0') return std::nullopt;
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value == 0 || value > 65535)
    return std::nullopt;
  return static_cast<std::uint16_t>(value);
}

bool is_lower_hex(std::string_view s) {
  for (char c : s)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

}  // namespace

std::string render_node_uri(const NodeId& id) {
  std::string out(kScheme);
  out += to_hex(id.pubkey);
  out += '@';
  out += id.host;
  out += ':';
  out += std::to_string(id.port);
  out += kRaftParam;
  out += std::to_string(id.raftport);
  return out;
}

std::optional<NodeId> parse_node_uri(std::string_view uri) {
  if (!uri.starts_with(kScheme)) return std::nullopt;
  uri.remove_prefix(kScheme.size());
  auto at = uri.find('@');
  if (at != 64) return std::nullopt;
  auto key_hex = uri.substr(0, 64);
  if (!is_lower_hex(key_hex)) return std::nullopt;
  auto rest = uri.substr(65);
  auto q = rest.find(kRaftParam);
  if (q == std::string_view::npos) return std::nullopt;
  auto hostport = rest.substr(0, q);
  auto raft = parse_port(rest.substr(q + kRaftParam.size()));
  auto colon = hostport.rfind(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  auto host = hostport.substr(0, colon);
  if (host.find_first_of("@?/ ") != std::string_view::npos) return std::nullopt;
  auto port = parse_port(hostport.substr(colon + 1));
  if (!port || !raft) return std::nullopt;

  NodeId id;
  id.pubkey = *fixed_from_hex<32>(key_hex);
  id.host = std::string(host);
  id.port = *port;
  id.raftport = *raft;
  return id;
}

void encode_node_id(codec::Writer& w, const NodeId& id) {
  w.fixed(id.pubkey);
  w.str(id.host);
  w.u16(id.port);
  w.u16(id.raftport);
}

NodeId decode_node_id(codec::Reader& r) {
  NodeId id;
  id.pubkey = r.fixed<32>();
  id.host = r.str();
  id.port = r.u16();
  id.raftport = r.u16();
  return id;
}

std::string short_name(const PublicKey& key) { return to_hex(key).substr(0, 8); }

}  // namespace rmsd
