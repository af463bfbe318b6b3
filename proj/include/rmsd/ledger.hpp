#pragma once

// Chain validation: transaction verification against contract state,
// block linking rules, and full-chain replay.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmsd/block.hpp"
#include "rmsd/contract.hpp"

namespace rmsd::ledger {

enum class TxError : std::uint8_t {
  BadSignature,
  BadNonce,
  Unauthorized,
  MalformedPayload,
  SelfDemotionForbidden,
  UnknownId,
  AlreadyApproved,
};

std::string_view tx_error_name(TxError e);
TxError from_contract_error(contract::ContractError e);

/// Signature, tx_id, nonce (== next expected), payload shape, and the role rule.
/// Does not check record existence; that surfaces when the payload is applied.
std::optional<TxError> verify_transaction(const Transaction& tx,
                                          const contract::ContractState& state);

/// verify_transaction followed by apply_payload; on success the sender's nonce advances.
/// State is untouched on failure.
std::optional<TxError> apply_transaction(contract::ContractState& state, const Transaction& tx,
                                         std::uint64_t height);

enum class BlockError : std::uint8_t {
  BadHeight,
  BadPrevHash,
  BadBlockHash,
  BadTimestamp,
  BadConfig,
  TooManyTransactions,
  BadTransaction,
  Undecodable,
};

std::string_view block_error_name(BlockError e);

struct BlockRejection {
  BlockError error;
  std::optional<std::size_t> tx_index;
  std::optional<TxError> tx_error;

  std::string describe() const;
  bool operator==(const BlockRejection&) const = default;
};

/// A chain together with the contract state and membership at its tip.
class Ledger {
 public:
  Ledger() = default;

  /// Validates and applies a genesis block on an empty state.
  static Expected<Ledger, BlockRejection> from_genesis(const Block& genesis);

  /// Checks `block` as the next block without modifying anything.
  std::optional<BlockRejection> check(const Block& block) const;
  /// On success the block is appended; on rejection nothing changes.
  std::optional<BlockRejection> append(const Block& block);

  const Chain& chain() const { return chain_; }
  const contract::ContractState& state() const { return state_; }
  const std::vector<NodeId>& members() const { return members_; }
  bool empty() const { return chain_.empty(); }

 private:
  std::optional<BlockRejection> apply(const Block& block, contract::ContractState& state,
                                      std::vector<NodeId>& members) const;

  Chain chain_;
  contract::ContractState state_;
  std::vector<NodeId> members_;
};

std::optional<BlockRejection> append_block(Ledger& ledger, const Block& block);

struct Violation {
  std::uint64_t height;
  BlockRejection reason;
};

/// Replays from genesis; reports the lowest violating position.
std::optional<Violation> validate_chain(const Chain& chain);
/// Replays a chain into a fresh ledger; nullopt if invalid.
std::optional<Ledger> replay_chain(const Chain& chain);

/// The genesis block: bootstrap membership and the first admin's self-grant.
Block make_genesis(const KeyPair& admin, std::vector<NodeId> members, std::uint64_t timestamp,
                   const PublicKey& proposer);

}  // namespace rmsd::ledger
