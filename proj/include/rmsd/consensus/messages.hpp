#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rmsd/block.hpp"
#include "rmsd/ledger.hpp"

namespace rmsd::consensus {

/// One replicated log slot: a whole block tagged with the term it was proposed in.
struct LogEntry {
  std::uint64_t term = 0;
  Block block;
  bool operator==(const LogEntry&) const = default;
};

struct VoteRequest {
  std::uint64_t term = 0;
  PublicKey candidate;
  std::uint64_t last_log_height = 0;
  Digest last_log_hash;
  std::uint64_t last_log_term = 0;
  bool operator==(const VoteRequest&) const = default;
};

struct VoteResponse {
  std::uint64_t term = 0;
  bool granted = false;
  bool operator==(const VoteResponse&) const = default;
};

struct AppendEntries {
  std::uint64_t term = 0;
  PublicKey leader;
  std::uint64_t prev_height = 0;
  Digest prev_hash;
  std::vector<LogEntry> entries;
  std::uint64_t leader_commit = 0;
  bool operator==(const AppendEntries&) const = default;
};

struct AppendResponse {
  std::uint64_t term = 0;
  bool success = false;
  /// On success the highest height now matching the leader; on failure a
  /// hint for where the leader should retry from.
  std::uint64_t match_height = 0;
  bool operator==(const AppendResponse&) const = default;
};

/// Client transactions relayed from a follower to the leader.
struct ForwardTransactions {
  std::vector<Transaction> txs;
  bool operator==(const ForwardTransactions&) const = default;
};

/// Leader -> origin: transactions dropped from the pool and why.
struct TxRejected {
  struct Item {
    Digest tx_id;
    ledger::TxError reason;
    bool operator==(const Item&) const = default;
  };
  std::vector<Item> items;
  bool operator==(const TxRejected&) const = default;
};

struct ForwardAddPeer {
  NodeId node;
  bool operator==(const ForwardAddPeer&) const = default;
};

struct AddPeerRejected {
  PublicKey node;
  std::string reason;
  bool operator==(const AddPeerRejected&) const = default;
};

using Message = std::variant<VoteRequest, VoteResponse, AppendEntries, AppendResponse,
                             ForwardTransactions, TxRejected, ForwardAddPeer, AddPeerRejected>;

std::string_view message_type(const Message& m);
/// Term carried by the message, 0 for client-relay messages.
std::uint64_t message_term(const Message& m);

struct Envelope {
  PublicKey from;
  PublicKey to;
  Message msg;
  Signature sig;
  bool operator==(const Envelope&) const = default;
};

/// Canonical bytes of (from, to, message) that the signature covers.
Bytes signing_bytes(const Envelope& e);
void sign_envelope(Envelope& e, const KeyPair& key);
bool verify_envelope(const Envelope& e);

/// Wire form: a JSON object with `type`, `term`, `from`, `to`, `sig` and the
/// message fields; blocks are base64 of their canonical bytes.
nlohmann::json envelope_to_json(const Envelope& e);
/// Throws std::runtime_error (or a nlohmann exception) on malformed input.
Envelope envelope_from_json(const nlohmann::json& j);

/// 32-bit big-endian length prefix followed by the JSON text.
Bytes frame_envelope(const Envelope& e);

}  // namespace rmsd::consensus
