#include "rmsd/contract.hpp"

#include <algorithm>

namespace rmsd::contract {

std::string_view error_name(ContractError e) {
  switch (e) {
    case ContractError::Unauthorized: return "Unauthorized";
    case ContractError::SelfDemotionForbidden: return "SelfDemotionForbidden";
    case ContractError::MalformedPayload: return "MalformedPayload";
    case ContractError::UnknownId: return "UnknownId";
    case ContractError::AlreadyApproved: return "AlreadyApproved";
  }
  return "Unknown";
}

std::string_view status_label(RecordKind kind, Status s) {
  if (s == Status::Approved) return "approved";
  return kind == RecordKind::Need ? "waiting for confirmation" : "waiting for approval";
}

std::optional<Status> parse_status_label(RecordKind kind, std::string_view label) {
  for (auto s : {Status::WaitingApproval, Status::Approved})
    if (status_label(kind, s) == label) return s;
  return std::nullopt;
}

ContractState genesis_state(const Account& first_admin) {
  ContractState s;
  s.roles[first_admin] = Role::Admin;
  // The genesis block carries the admin's self-grant with nonce 0.
  s.next_nonce[first_admin] = 1;
  return s;
}

Role get_user_auth(const ContractState& state, const Account& account) {
  auto it = state.roles.find(account);
  return it == state.roles.end() ? Role::None : it->second;
}

std::size_t admin_count(const ContractState& state) {
  return static_cast<std::size_t>(std::count_if(
      state.roles.begin(), state.roles.end(), [](const auto& kv) { return kv.second == Role::Admin; }));
}

std::uint64_t expected_nonce(const ContractState& state, const Account& account) {
  auto it = state.next_nonce.find(account);
  return it == state.next_nonce.end() ? 0 : it->second;
}

std::optional<ContractError> require_role(const ContractState& state, const Account& account,
                                          Role needed) {
  if (sha256(role_label(get_user_auth(state, account))) != sha256(role_label(needed)))
    return ContractError::Unauthorized;
  return std::nullopt;
}

std::optional<ContractError> authorize(const ContractState& state, const Account& caller,
                                       const Payload& payload) {
  return std::visit(
      [&](const auto& p) -> std::optional<ContractError> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SetUser>) {
          if (admin_count(state) == 0 && p.target == caller && p.role == Role::Admin)
            return std::nullopt;
          return require_role(state, caller, Role::Admin);
        } else if constexpr (std::is_same_v<P, CreateNeed> || std::is_same_v<P, CreateSupport>) {
          return std::nullopt;
        } else {
          return require_role(state, caller, Role::Checker);
        }
      },
      payload);
}

std::optional<ContractError> set_user(ContractState& state, const Account& caller,
                                      const Account& target, Role role) {
  if (auto err = authorize(state, caller, SetUser{target, role})) return err;
  if (get_user_auth(state, target) == Role::Admin && role != Role::Admin && admin_count(state) == 1)
    return ContractError::SelfDemotionForbidden;
  if (role == Role::None)
    state.roles.erase(target);
  else
    state.roles[target] = role;
  return std::nullopt;
}

Expected<std::uint64_t, ContractError> create_need(ContractState& state, const Account& caller,
                                                   std::string kind, std::uint64_t amount,
                                                   std::string unit, const Digest& personal_ref,
                                                   std::uint64_t height) {
  if (kind.empty() || amount == 0) return fail(ContractError::MalformedPayload);
  NeedRecord r;
  r.need_id = state.needs.size();
  r.kind = std::move(kind);
  r.amount = amount;
  r.unit = std::move(unit);
  r.creator = caller;
  r.personal_ref = personal_ref;
  r.created_at = height;
  state.needs.push_back(std::move(r));
  return state.needs.back().need_id;
}

Expected<std::uint64_t, ContractError> create_support(ContractState& state, const Account& caller,
                                                      std::string kind, std::uint64_t amount,
                                                      std::string unit, std::string shipping,
                                                      const Digest& personal_ref,
                                                      std::uint64_t height) {
  if (kind.empty() || amount == 0 || shipping.empty()) return fail(ContractError::MalformedPayload);
  SupportRecord r;
  r.support_id = state.supports.size();
  r.kind = std::move(kind);
  r.amount = amount;
  r.unit = std::move(unit);
  r.shipping = std::move(shipping);
  r.creator = caller;
  r.personal_ref = personal_ref;
  r.created_at = height;
  state.supports.push_back(std::move(r));
  return state.supports.back().support_id;
}

namespace {

template <typename Record>
std::optional<ContractError> approve(ContractState& state, std::vector<Record>& records,
                                     const Account& caller, std::uint64_t id,
                                     std::uint64_t height) {
  if (auto err = require_role(state, caller, Role::Checker)) return err;
  if (id >= records.size()) return ContractError::UnknownId;
  auto& r = records[id];
  if (r.status == Status::Approved) return ContractError::AlreadyApproved;
  r.status = Status::Approved;
  r.approved_by = caller;
  r.approved_at = height;
  return std::nullopt;
}

}  // namespace

std::optional<ContractError> approve_need(ContractState& state, const Account& caller,
                                          std::uint64_t need_id, std::uint64_t height) {
  return approve(state, state.needs, caller, need_id, height);
}

std::optional<ContractError> approve_support(ContractState& state, const Account& caller,
                                             std::uint64_t support_id, std::uint64_t height) {
  return approve(state, state.supports, caller, support_id, height);
}

std::optional<ContractError> apply_payload(ContractState& state, const Account& caller,
                                           const Payload& payload, std::uint64_t height) {
  return std::visit(
      [&](const auto& p) -> std::optional<ContractError> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SetUser>) {
          return set_user(state, caller, p.target, p.role);
        } else if constexpr (std::is_same_v<P, CreateNeed>) {
          auto r = create_need(state, caller, p.kind, p.amount, p.unit, p.personal_ref, height);
          if (!r) return r.error();
          return std::nullopt;
        } else if constexpr (std::is_same_v<P, CreateSupport>) {
          auto r = create_support(state, caller, p.kind, p.amount, p.unit, p.shipping,
                                  p.personal_ref, height);
          if (!r) return r.error();
          return std::nullopt;
        } else if constexpr (std::is_same_v<P, ApproveNeed>) {
          return approve_need(state, caller, p.need_id, height);
        } else {
          return approve_support(state, caller, p.support_id, height);
        }
      },
      payload);
}

Expected<NeedRecord, ContractError> show_need(const ContractState& state, std::uint64_t need_id) {
  if (need_id >= state.needs.size()) return fail(ContractError::UnknownId);
  return state.needs[need_id];
}

const std::vector<NeedRecord>& show_needs(const ContractState& state) { return state.needs; }

Expected<SupportRecord, ContractError> show_support(const ContractState& state,
                                                    std::uint64_t support_id) {
  if (support_id >= state.supports.size()) return fail(ContractError::UnknownId);
  return state.supports[support_id];
}

const std::vector<SupportRecord>& show_supports(const ContractState& state) {
  return state.supports;
}

std::vector<SupportRecord> show_all_approved_supports(const ContractState& state) {
  std::vector<SupportRecord> out;
  std::copy_if(state.supports.begin(), state.supports.end(), std::back_inserter(out),
               [](const SupportRecord& r) { return r.status == Status::Approved; });
  return out;
}

Expected<std::string, ContractError> show_need_status(const ContractState& state,
                                                      const Account& caller, std::uint64_t id) {
  if (auto err = require_role(state, caller, Role::Checker)) return fail(*err);
  if (id >= state.needs.size()) return fail(ContractError::UnknownId);
  return std::string(status_label(RecordKind::Need, state.needs[id].status));
}

Expected<std::string, ContractError> show_support_status(const ContractState& state,
                                                         const Account& caller, std::uint64_t id) {
  if (auto err = require_role(state, caller, Role::Checker)) return fail(*err);
  if (id >= state.supports.size()) return fail(ContractError::UnknownId);
  return std::string(status_label(RecordKind::Support, state.supports[id].status));
}

namespace {

void encode_optional_account(codec::Writer& w, const std::optional<Account>& a) {
  w.u8(a ? 1 : 0);
  if (a) w.fixed(*a);
}

void encode_optional_u64(codec::Writer& w, const std::optional<std::uint64_t>& v) {
  w.u8(v ? 1 : 0);
  if (v) w.u64(*v);
}

}  // namespace

Bytes encode_state(const ContractState& state) {
  codec::Writer w;
  w.u64(state.applied_height);
  w.u32(static_cast<std::uint32_t>(state.roles.size()));
  for (const auto& [account, role] : state.roles) {
    w.fixed(account);
    w.u8(static_cast<std::uint8_t>(role));
  }
  w.u32(static_cast<std::uint32_t>(state.next_nonce.size()));
  for (const auto& [account, nonce] : state.next_nonce) {
    w.fixed(account);
    w.u64(nonce);
  }
  w.u32(static_cast<std::uint32_t>(state.needs.size()));
  for (const auto& r : state.needs) {
    w.u64(r.need_id);
    w.str(r.kind);
    w.u64(r.amount);
    w.str(r.unit);
    w.fixed(r.creator);
    w.u8(static_cast<std::uint8_t>(r.status));
    w.fixed(r.personal_ref);
    encode_optional_account(w, r.approved_by);
    w.u64(r.created_at);
    encode_optional_u64(w, r.approved_at);
  }
  w.u32(static_cast<std::uint32_t>(state.supports.size()));
  for (const auto& r : state.supports) {
    w.u64(r.support_id);
    w.str(r.kind);
    w.u64(r.amount);
    w.str(r.unit);
    w.str(r.shipping);
    w.fixed(r.creator);
    w.u8(static_cast<std::uint8_t>(r.status));
    w.fixed(r.personal_ref);
    encode_optional_account(w, r.approved_by);
    w.u64(r.created_at);
    encode_optional_u64(w, r.approved_at);
  }
  return std::move(w).take();
}

Digest state_digest(const ContractState& state) { return sha256(encode_state(state)); }

}  // namespace rmsd::contract
