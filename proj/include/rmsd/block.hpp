#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rmsd/node_id.hpp"
#include "rmsd/transaction.hpp"

namespace rmsd {

inline constexpr std::size_t kMaxTransactionsPerBlock = 1024;

/// Membership carried through the log. Height 0 bootstraps the initial
/// member list; later blocks may add exactly one peer and carry no transactions.
struct ConfigChange {
  enum class Kind : std::uint8_t { Bootstrap = 1, AddPeer = 2 };
  Kind kind = Kind::Bootstrap;
  std::vector<NodeId> nodes;

  bool operator==(const ConfigChange&) const = default;
};

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash;
  std::uint64_t timestamp = 0;  // ms since epoch, proposer-local
  PublicKey proposer;
  std::vector<Transaction> transactions;
  std::optional<ConfigChange> config;
  Digest block_hash;

  bool operator==(const Block&) const = default;
};

/// Bytes the block hash commits to: header fields, tx ids in order, config section.
Bytes encode_block_header(const Block& block);
/// SHA-256 over encode_block_header; ignores the stored block_hash.
Digest hash_block(const Block& block);

/// Full block: header fields, full transactions, config, block_hash.
Bytes encode_block(const Block& block);
void encode_block(codec::Writer& w, const Block& block);
Block decode_block(ByteView bytes);
Block decode_block(codec::Reader& r);

/// Fills block_hash.
Block seal_block(Block block);

struct Chain {
  std::vector<Block> blocks;

  Digest tip() const { return blocks.empty() ? Digest{} : blocks.back().block_hash; }
  std::uint64_t height() const { return blocks.empty() ? 0 : blocks.back().height; }
  bool empty() const { return blocks.empty(); }
};

}  // namespace rmsd
