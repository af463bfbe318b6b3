#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rmsd/codec.hpp"
#include "rmsd/crypto.hpp"

namespace rmsd {

/// Network identity of a node: its consensus key plus where to reach it.
struct NodeId {
  PublicKey pubkey;
  std::string host;
  std::uint16_t port = 0;
  std::uint16_t raftport = 0;

  bool operator==(const NodeId&) const = default;
};

/// `rnode://<64-hex-pubkey>@<host>:<port>?raftport=<port>`
std::string render_node_uri(const NodeId& id);
std::optional<NodeId> parse_node_uri(std::string_view uri);

void encode_node_id(codec::Writer& w, const NodeId& id);
NodeId decode_node_id(codec::Reader& r);

/// Short form for logs: first 8 hex chars of the key.
std::string short_name(const PublicKey& key);

}  // namespace rmsd
