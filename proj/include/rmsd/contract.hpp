#pragma once

// Deterministic application state machine: role management plus the
// need/support creation and approval lifecycle. Every mutator either
// succeeds or leaves the state untouched.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rmsd/expected.hpp"
#include "rmsd/transaction.hpp"

namespace rmsd::contract {

enum class ContractError : std::uint8_t {
  Unauthorized,
  SelfDemotionForbidden,
  MalformedPayload,
  UnknownId,
  AlreadyApproved,
};

std::string_view error_name(ContractError e);

enum class Status : std::uint8_t { WaitingApproval = 0, Approved = 1 };

enum class RecordKind : std::uint8_t { Need, Support };

/// Display label for a lifecycle status. Needs and supports use different
/// wording for the pending state.
std::string_view status_label(RecordKind kind, Status s);
std::optional<Status> parse_status_label(RecordKind kind, std::string_view label);

struct NeedRecord {
  std::uint64_t need_id = 0;
  std::string kind;
  std::uint64_t amount = 0;
  std::string unit;
  Account creator;
  Status status = Status::WaitingApproval;
  Digest personal_ref;
  std::optional<Account> approved_by;
  std::uint64_t created_at = 0;
  std::optional<std::uint64_t> approved_at;

  bool operator==(const NeedRecord&) const = default;
};

struct SupportRecord {
  std::uint64_t support_id = 0;
  std::string kind;
  std::uint64_t amount = 0;
  std::string unit;
  std::string shipping;
  Account creator;
  Status status = Status::WaitingApproval;
  Digest personal_ref;
  std::optional<Account> approved_by;
  std::uint64_t created_at = 0;
  std::optional<std::uint64_t> approved_at;

  bool operator==(const SupportRecord&) const = default;
};

struct ContractState {
  std::map<Account, Role> roles;
  /// Next expected nonce per sender; absent means 0.
  std::map<Account, std::uint64_t> next_nonce;
  /// Indexed by id; ids are dense from 0, so the next id is the size.
  std::vector<NeedRecord> needs;
  std::vector<SupportRecord> supports;
  std::uint64_t applied_height = 0;

  bool operator==(const ContractState&) const = default;
};

ContractState genesis_state(const Account& first_admin);

Role get_user_auth(const ContractState& state, const Account& account);
std::size_t admin_count(const ContractState& state);
std::uint64_t expected_nonce(const ContractState& state, const Account& account);

/// Compares digests of canonical role labels; equivalent to `role == needed`.
std::optional<ContractError> require_role(const ContractState& state, const Account& account,
                                          Role needed);

/// Static authorization of a payload: the role rule only, no existence checks.
/// SetUser needs Admin; creation is open to every account; approvals need Checker.
/// With no Admin present (before genesis has been applied) a self-grant of Admin
/// bootstraps the first administrator.
std::optional<ContractError> authorize(const ContractState& state, const Account& caller,
                                       const Payload& payload);

std::optional<ContractError> set_user(ContractState& state, const Account& caller,
                                      const Account& target, Role role);
Expected<std::uint64_t, ContractError> create_need(ContractState& state, const Account& caller,
                                                   std::string kind, std::uint64_t amount,
                                                   std::string unit, const Digest& personal_ref,
                                                   std::uint64_t height);
Expected<std::uint64_t, ContractError> create_support(ContractState& state, const Account& caller,
                                                      std::string kind, std::uint64_t amount,
                                                      std::string unit, std::string shipping,
                                                      const Digest& personal_ref,
                                                      std::uint64_t height);
std::optional<ContractError> approve_need(ContractState& state, const Account& caller,
                                          std::uint64_t need_id, std::uint64_t height);
std::optional<ContractError> approve_support(ContractState& state, const Account& caller,
                                             std::uint64_t support_id, std::uint64_t height);

/// Authorizes and applies one payload at the given block height.
std::optional<ContractError> apply_payload(ContractState& state, const Account& caller,
                                           const Payload& payload, std::uint64_t height);

Expected<NeedRecord, ContractError> show_need(const ContractState& state, std::uint64_t need_id);
const std::vector<NeedRecord>& show_needs(const ContractState& state);
Expected<SupportRecord, ContractError> show_support(const ContractState& state,
                                                    std::uint64_t support_id);
const std::vector<SupportRecord>& show_supports(const ContractState& state);
std::vector<SupportRecord> show_all_approved_supports(const ContractState& state);

Expected<std::string, ContractError> show_need_status(const ContractState& state,
                                                      const Account& caller, std::uint64_t id);
Expected<std::string, ContractError> show_support_status(const ContractState& state,
                                                         const Account& caller, std::uint64_t id);

/// Deterministic encoding of the whole state, for cross-node comparison.
Bytes encode_state(const ContractState& state);
Digest state_digest(const ContractState& state);

}  // namespace rmsd::contract
