#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "rmsd/codec.hpp"
#include "rmsd/crypto.hpp"

namespace rmsd {

enum class Role : std::uint8_t { None = 0, Admin = 1, Checker = 2, Creator = 3 };

inline constexpr Role kAllRoles[] = {Role::None, Role::Admin, Role::Checker, Role::Creator};

std::string_view role_label(Role r);
std::optional<Role> parse_role(std::string_view label);

// Payload variants. Tag bytes are part of the canonical encoding.
struct SetUser {
  static constexpr std::uint8_t kTag = 0x01;
  Account target;
  Role role = Role::None;
  bool operator==(const SetUser&) const = default;
};

struct CreateNeed {
  static constexpr std::uint8_t kTag = 0x02;
  std::string kind;
  std::uint64_t amount = 0;
  std::string unit;
  Digest personal_ref;
  bool operator==(const CreateNeed&) const = default;
};

struct CreateSupport {
  static constexpr std::uint8_t kTag = 0x03;
  std::string kind;
  std::uint64_t amount = 0;
  std::string unit;
  std::string shipping;
  Digest personal_ref;
  bool operator==(const CreateSupport&) const = default;
};

struct ApproveNeed {
  static constexpr std::uint8_t kTag = 0x04;
  std::uint64_t need_id = 0;
  bool operator==(const ApproveNeed&) const = default;
};

struct ApproveSupport {
  static constexpr std::uint8_t kTag = 0x05;
  std::uint64_t support_id = 0;
  bool operator==(const ApproveSupport&) const = default;
};

using Payload = std::variant<SetUser, CreateNeed, CreateSupport, ApproveNeed, ApproveSupport>;

std::string_view payload_name(const Payload& p);

struct Transaction {
  Digest tx_id;
  Account sender;
  std::uint64_t nonce = 0;
  Payload payload;
  Signature signature;

  bool operator==(const Transaction&) const = default;
};

/// Canonical bytes of (sender, nonce, payload): what tx_id hashes and the signature covers.
Bytes encode_tx_body(const Account& sender, std::uint64_t nonce, const Payload& payload);
/// Body followed by the 64-byte signature.
Bytes encode_transaction(const Transaction& tx);
void encode_transaction(codec::Writer& w, const Transaction& tx);
/// Throws codec::DecodeError on malformed input. tx_id is recomputed from the body.
Transaction decode_transaction(ByteView bytes);
Transaction decode_transaction(codec::Reader& r);

Digest compute_tx_id(const Transaction& tx);

Transaction make_transaction(const KeyPair& key, std::uint64_t nonce, Payload payload);

}  // namespace rmsd
