#include "rmsd/ledger.hpp"

#include <algorithm>
#include <set>

namespace rmsd::ledger {

using contract::ContractState;

std::string_view tx_error_name(TxError e) {
  switch (e) {
    case TxError::BadSignature: return "BadSignature";
    case TxError::BadNonce: return "BadNonce";
    case TxError::Unauthorized: return "Unauthorized";
    case TxError::MalformedPayload: return "MalformedPayload";
    case TxError::SelfDemotionForbidden: return "SelfDemotionForbidden";
    case TxError::UnknownId: return "UnknownId";
    case TxError::AlreadyApproved: return "AlreadyApproved";
  }
  return "Unknown";
}

TxError from_contract_error(contract::ContractError e) {
  using contract::ContractError;
  switch (e) {
    case ContractError::Unauthorized: return TxError::Unauthorized;
    case ContractError::SelfDemotionForbidden: return TxError::SelfDemotionForbidden;
    case ContractError::MalformedPayload: return TxError::MalformedPayload;
    case ContractError::UnknownId: return TxError::UnknownId;
    case ContractError::AlreadyApproved: return TxError::AlreadyApproved;
  }
  return TxError::MalformedPayload;
}

std::string_view block_error_name(BlockError e) {
  switch (e) {
    case BlockError::BadHeight: return "BadHeight";
    case BlockError::BadPrevHash: return "BadPrevHash";
    case BlockError::BadBlockHash: return "BadBlockHash";
    case BlockError::BadTimestamp: return "BadTimestamp";
    case BlockError::BadConfig: return "BadConfig";
    case BlockError::TooManyTransactions: return "TooManyTransactions";
    case BlockError::BadTransaction: return "BadTransaction";
    case BlockError::Undecodable: return "Undecodable";
  }
  return "Unknown";
}

std::string BlockRejection::describe() const {
  std::string s(block_error_name(error));
  if (tx_index) {
    s += "(" + std::to_string(*tx_index);
    if (tx_error) s += ", " + std::string(tx_error_name(*tx_error));
    s += ")";
  }
  return s;
}

namespace {

bool payload_well_formed(const Payload& payload) {
  return std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CreateNeed>) {
          return !p.kind.empty() && p.amount > 0;
        } else if constexpr (std::is_same_v<P, CreateSupport>) {
          return !p.kind.empty() && p.amount > 0 && !p.shipping.empty();
        } else {
          return true;
        }
      },
      payload);
}

}  // namespace

std::optional<TxError> verify_transaction(const Transaction& tx, const ContractState& state) {
  auto body = encode_tx_body(tx.sender, tx.nonce, tx.payload);
  if (!verify_signature(tx.sender, body, tx.signature)) return TxError::BadSignature;
  if (sha256(body) != tx.tx_id) return TxError::MalformedPayload;
  if (tx.nonce != contract::expected_nonce(state, tx.sender)) return TxError::BadNonce;
  if (!payload_well_formed(tx.payload)) return TxError::MalformedPayload;
  if (auto err = contract::authorize(state, tx.sender, tx.payload))
    return from_contract_error(*err);
  return std::nullopt;
}

std::optional<TxError> apply_transaction(ContractState& state, const Transaction& tx,
                                         std::uint64_t height) {
  if (auto err = verify_transaction(tx, state)) return err;
  if (auto err = contract::apply_payload(state, tx.sender, tx.payload, height))
    return from_contract_error(*err);
  state.next_nonce[tx.sender] = tx.nonce + 1;
  return std::nullopt;
}

std::optional<BlockRejection> Ledger::apply(const Block& block, ContractState& state,
                                            std::vector<NodeId>& members) const {
  auto reject = [](BlockError e) { return BlockRejection{e, std::nullopt, std::nullopt}; };

  if (chain_.empty()) {
    if (block.height != 0) return reject(BlockError::BadHeight);
    if (!block.prev_hash.is_zero()) return reject(BlockError::BadPrevHash);
  } else {
    const auto& tip = chain_.blocks.back();
    if (block.height != tip.height + 1) return reject(BlockError::BadHeight);
    if (block.prev_hash != tip.block_hash) return reject(BlockError::BadPrevHash);
  }
  if (hash_block(block) != block.block_hash) return reject(BlockError::BadBlockHash);
  if (!chain_.empty() && block.timestamp < chain_.blocks.back().timestamp)
    return reject(BlockError::BadTimestamp);
  if (block.transactions.size() > kMaxTransactionsPerBlock)
    return reject(BlockError::TooManyTransactions);

  if (block.height == 0) {
    if (!block.config || block.config->kind != ConfigChange::Kind::Bootstrap ||
        block.config->nodes.empty())
      return reject(BlockError::BadConfig);
    std::set<PublicKey> keys;
    for (const auto& n : block.config->nodes)
      if (!keys.insert(n.pubkey).second) return reject(BlockError::BadConfig);
    if (block.transactions.empty()) return reject(BlockError::BadConfig);
    members = block.config->nodes;
  } else if (block.config) {
    if (block.config->kind != ConfigChange::Kind::AddPeer || block.config->nodes.size() != 1 ||
        !block.transactions.empty())
      return reject(BlockError::BadConfig);
    const auto& added = block.config->nodes.front();
    if (std::any_of(members.begin(), members.end(),
                    [&](const NodeId& m) { return m.pubkey == added.pubkey; }))
      return reject(BlockError::BadConfig);
    members.push_back(added);
  }

  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    if (auto err = apply_transaction(state, block.transactions[i], block.height))
      return BlockRejection{BlockError::BadTransaction, i, *err};
  }
  state.applied_height = block.height;
  if (block.height == 0 && contract::admin_count(state) == 0) return reject(BlockError::BadConfig);
  return std::nullopt;
}

std::optional<BlockRejection> Ledger::check(const Block& block) const {
  auto state = state_;
  auto members = members_;
  return apply(block, state, members);
}

std::optional<BlockRejection> Ledger::append(const Block& block) {
  auto state = state_;
  auto members = members_;
  if (auto err = apply(block, state, members)) return err;
  state_ = std::move(state);
  members_ = std::move(members);
  chain_.blocks.push_back(block);
  return std::nullopt;
}

Expected<Ledger, BlockRejection> Ledger::from_genesis(const Block& genesis) {
  Ledger l;
  if (auto err = l.append(genesis)) return fail(*err);
  return l;
}

std::optional<BlockRejection> append_block(Ledger& ledger, const Block& block) {
  return ledger.append(block);
}

std::optional<Violation> validate_chain(const Chain& chain) {
  Ledger l;
  for (std::size_t i = 0; i < chain.blocks.size(); ++i) {
    if (auto err = l.append(chain.blocks[i])) return Violation{i, *err};
  }
  return std::nullopt;
}

std::optional<Ledger> replay_chain(const Chain& chain) {
  Ledger l;
  for (const auto& b : chain.blocks)
    if (l.append(b)) return std::nullopt;
  return l;
}

Block make_genesis(const KeyPair& admin, std::vector<NodeId> members, std::uint64_t timestamp,
                   const PublicKey& proposer) {
  Block b;
  b.height = 0;
  b.timestamp = timestamp;
  b.proposer = proposer;
  b.transactions.push_back(make_transaction(admin, 0, SetUser{admin.public_key(), Role::Admin}));
  b.config = ConfigChange{ConfigChange::Kind::Bootstrap, std::move(members)};
  return seal_block(std::move(b));
}

}  // namespace rmsd::ledger
