#include "rmsd/block.hpp"

namespace rmsd {
namespace {

void encode_config(codec::Writer& w, const std::optional<ConfigChange>& config) {
  if (!config) {
    w.u8(0);
    return;
  }
  w.u8(static_cast<std::uint8_t>(config->kind));
  w.u32(static_cast<std::uint32_t>(config->nodes.size()));
  for (const auto& n : config->nodes) encode_node_id(w, n);
}

std::optional<ConfigChange> decode_config(codec::Reader& r) {
  auto kind = r.u8();
  if (kind == 0) return std::nullopt;
  if (kind != static_cast<std::uint8_t>(ConfigChange::Kind::Bootstrap) &&
      kind != static_cast<std::uint8_t>(ConfigChange::Kind::AddPeer))
    throw codec::DecodeError("unknown config kind");
  ConfigChange c;
  c.kind = static_cast<ConfigChange::Kind>(kind);
  auto n = r.u32();
  if (n > 4096) throw codec::DecodeError("config node list too long");
  for (std::uint32_t i = 0; i < n; ++i) c.nodes.push_back(decode_node_id(r));
  return c;
}

void encode_prefix(codec::Writer& w, const Block& b) {
  w.u64(b.height);
  w.fixed(b.prev_hash);
  w.u64(b.timestamp);
  w.fixed(b.proposer);
  w.u32(static_cast<std::uint32_t>(b.transactions.size()));
}

}  // namespace

Bytes encode_block_header(const Block& block) {
  codec::Writer w;
  encode_prefix(w, block);
  for (const auto& tx : block.transactions) w.fixed(tx.tx_id);
  encode_config(w, block.config);
  return std::move(w).take();
}

Digest hash_block(const Block& block) { return sha256(encode_block_header(block)); }

void encode_block(codec::Writer& w, const Block& block) {
  encode_prefix(w, block);
  for (const auto& tx : block.transactions) encode_transaction(w, tx);
  encode_config(w, block.config);
  w.fixed(block.block_hash);
}

Bytes encode_block(const Block& block) {
  codec::Writer w;
  encode_block(w, block);
  return std::move(w).take();
}

Block decode_block(codec::Reader& r) {
  Block b;
  b.height = r.u64();
  b.prev_hash = r.fixed<32>();
  b.timestamp = r.u64();
  b.proposer = r.fixed<32>();
  auto n = r.u32();
  if (n > kMaxTransactionsPerBlock) throw codec::DecodeError("too many transactions");
  b.transactions.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) b.transactions.push_back(decode_transaction(r));
  b.config = decode_config(r);
  b.block_hash = r.fixed<32>();
  return b;
}

Block decode_block(ByteView bytes) {
  codec::Reader r(bytes);
  auto b = decode_block(r);
  r.expect_done();
  return b;
}

Block seal_block(Block block) {
  block.block_hash = hash_block(block);
  return block;
}

}  // namespace rmsd
