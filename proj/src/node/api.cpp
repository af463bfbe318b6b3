#include "rmsd/node/api.hpp"

#include <chrono>
#include <charconv>

namespace rmsd::api {

using nlohmann::json;

std::string request_signing_string(std::string_view method, std::string_view path,
                                   std::string_view body, std::uint64_t timestamp) {
  std::string s;
  s.append(method).append("\n").append(path).append("\n");
  s += to_hex(sha256(body));
  s += "\n" + std::to_string(timestamp);
  return s;
}

AuthHeaders sign_request(const KeyPair& key, std::string_view method, std::string_view path,
                         std::string_view body, std::uint64_t unix_seconds) {
  auto msg = request_signing_string(method, path, body, unix_seconds);
  auto sig = key.sign(ByteView{reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size()});
  return {to_hex(key.public_key()), std::to_string(unix_seconds), to_hex(sig)};
}

Expected<Account, std::string> verify_request(std::string_view key_hex,
                                              std::string_view timestamp,
                                              std::string_view signature_hex,
                                              std::string_view method, std::string_view path,
                                              std::string_view body, std::uint64_t now_seconds) {
  if (key_hex.empty() || timestamp.empty() || signature_hex.empty())
    return fail(std::string("missing authentication headers"));
  auto key = fixed_from_hex<32>(key_hex);
  auto sig = fixed_from_hex<64>(signature_hex);
  if (!key || !sig) return fail(std::string("malformed authentication headers"));
  std::uint64_t ts = 0;
  auto [ptr, ec] = std::from_chars(timestamp.data(), timestamp.data() + timestamp.size(), ts);
  if (ec != std::errc{} || ptr != timestamp.data() + timestamp.size())
    return fail(std::string("malformed timestamp"));
  auto skew = ts > now_seconds ? ts - now_seconds : now_seconds - ts;
  if (skew > kAuthWindowSeconds) return fail(std::string("timestamp outside the allowed window"));
  auto msg = request_signing_string(method, path, body, ts);
  if (!verify_signature(*key, ByteView{reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size()},
                        *sig))
    return fail(std::string("bad request signature"));
  return *key;
}

std::uint64_t unix_seconds_now() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

json error_body(std::string_view code, std::string_view message) {
  return {{"code", code}, {"message", message}};
}

namespace {

json optional_account(const std::optional<Account>& a) { return a ? json(to_hex(*a)) : json(nullptr); }
json optional_height(const std::optional<std::uint64_t>& h) { return h ? json(*h) : json(nullptr); }

std::optional<std::string> string_field(const json& j, const char* name, bool required,
                                        std::string& out, std::string& error) {
  if (!j.contains(name) || j.at(name).is_null()) {
    if (required) error = std::string(name) + " is required";
    return std::nullopt;
  }
  if (!j.at(name).is_string()) {
    error = std::string(name) + " must be a string";
    return std::nullopt;
  }
  out = j.at(name).get<std::string>();
  if (required && out.empty()) {
    error = std::string(name) + " must not be empty";
    return std::nullopt;
  }
  return out;
}

}  // namespace

json need_json(const contract::NeedRecord& r) {
  return {{"id", r.need_id},
          {"kind", r.kind},
          {"amount", r.amount},
          {"unit", r.unit},
          {"creator", to_hex(r.creator)},
          {"status", contract::status_label(contract::RecordKind::Need, r.status)},
          {"personal_ref", to_hex(r.personal_ref)},
          {"approved_by", optional_account(r.approved_by)},
          {"created_at", r.created_at},
          {"approved_at", optional_height(r.approved_at)}};
}

json block_json(const Block& b) {
  json txs = json::array();
  for (const auto& tx : b.transactions)
    txs.push_back({{"tx_id", to_hex(tx.tx_id)},
                   {"sender", to_hex(tx.sender)},
                   {"nonce", tx.nonce},
                   {"type", payload_name(tx.payload)}});
  json config = nullptr;
  if (b.config) {
    json nodes = json::array();
    for (const auto& n : b.config->nodes) nodes.push_back(render_node_uri(n));
    config = {{"kind", b.config->kind == ConfigChange::Kind::Bootstrap ? "Bootstrap" : "AddPeer"},
              {"nodes", nodes}};
  }
  return {{"height", b.height},
          {"hash", to_hex(b.block_hash)},
          {"prev_hash", to_hex(b.prev_hash)},
          {"timestamp", b.timestamp},
          {"proposer", to_hex(b.proposer)},
          {"transactions", txs},
          {"config", config},
          {"raw", to_base64(encode_block(b))}};
}

json support_json(const contract::SupportRecord& r) {
  return {{"id", r.support_id},
          {"kind", r.kind},
          {"amount", r.amount},
          {"unit", r.unit},
          {"shipping", r.shipping},
          {"creator", to_hex(r.creator)},
          {"status", contract::status_label(contract::RecordKind::Support, r.status)},
          {"personal_ref", to_hex(r.personal_ref)},
          {"approved_by", optional_account(r.approved_by)},
          {"created_at", r.created_at},
          {"approved_at", optional_height(r.approved_at)}};
}

json receipt_json(const Receipt& r) {
  json j = {{"tx_id", to_hex(r.tx_id)}};
  switch (r.status) {
    case ReceiptStatus::Pending: j["status"] = "Pending"; break;
    case ReceiptStatus::Committed:
      j["status"] = "Committed";
      j["height"] = r.height;
      break;
    case ReceiptStatus::Rejected:
      j["status"] = "Rejected";
      j["reason"] = r.reason;
      break;
  }
  if (r.personal_ref) j["personal_ref"] = to_hex(*r.personal_ref);
  return j;
}

Expected<Receipt, std::string> receipt_from_json(const json& j) {
  try {
    Receipt r;
    auto id = fixed_from_hex<32>(j.at("tx_id").get<std::string>());
    if (!id) return fail(std::string("bad tx_id"));
    r.tx_id = *id;
    auto status = j.at("status").get<std::string>();
    if (status == "Pending") {
      r.status = ReceiptStatus::Pending;
    } else if (status == "Committed") {
      r.status = ReceiptStatus::Committed;
      r.height = j.at("height").get<std::uint64_t>();
    } else if (status == "Rejected") {
      r.status = ReceiptStatus::Rejected;
      r.reason = j.at("reason").get<std::string>();
    } else {
      return fail("unknown receipt status " + status);
    }
    if (j.contains("personal_ref")) {
      auto ref = fixed_from_hex<32>(j.at("personal_ref").get<std::string>());
      if (!ref) return fail(std::string("bad personal_ref"));
      r.personal_ref = *ref;
    }
    return r;
  } catch (const json::exception& e) {
    return fail(std::string("malformed receipt: ") + e.what());
  }
}

Expected<privacy::PersonalRecord, std::string> personal_from_json(const json& j) {
  if (!j.is_object()) return fail(std::string("personal must be an object"));
  privacy::PersonalRecord r;
  std::string error;
  string_field(j, "name", false, r.name, error);
  string_field(j, "phone", false, r.phone, error);
  string_field(j, "address", false, r.address, error);
  string_field(j, "notes", false, r.notes, error);
  if (!error.empty()) return fail(error);
  if (auto v = privacy::validate_personal(r)) return fail("personal: " + *v);
  return r;
}

json personal_json(const privacy::PersonalRecord& r) {
  return {{"personal_ref", to_hex(r.personal_ref)}, {"name", r.name},
          {"phone", r.phone},                       {"address", r.address},
          {"notes", r.notes},                       {"collected_at", r.collected_at},
          {"collected_by", to_hex(r.collected_by)}};
}

Expected<ApplicationRequest, std::string> parse_application(const json& j) {
  if (!j.is_object()) return fail(std::string("body must be a JSON object"));
  ApplicationRequest a;
  std::string error, kind;
  if (!string_field(j, "kind", true, kind, error)) return fail(error);
  if (kind == "need") a.kind = contract::RecordKind::Need;
  else if (kind == "support") a.kind = contract::RecordKind::Support;
  else return fail(std::string("kind must be \"need\" or \"support\""));
  if (!string_field(j, "category", true, a.category, error)) return fail(error);
  if (!j.contains("amount") || j.at("amount").is_null()) return fail(std::string("amount is required"));
  const auto& amount = j.at("amount");
  const bool positive = amount.is_number_unsigned()
                            ? amount.get<std::uint64_t>() > 0
                            : amount.is_number_integer() && amount.get<std::int64_t>() > 0;
  if (!positive) return fail(std::string("amount must be a positive integer"));
  a.amount = j.at("amount").get<std::uint64_t>();
  string_field(j, "unit", false, a.unit, error);
  if (!error.empty()) return fail(error);
  if (a.kind == contract::RecordKind::Support) {
    if (!string_field(j, "shipping", true, a.shipping, error)) return fail(error);
  } else if (j.contains("shipping") && !j.at("shipping").is_null()) {
    return fail(std::string("shipping applies to supports only"));
  }
  if (!j.contains("personal")) return fail(std::string("personal is required"));
  auto personal = personal_from_json(j.at("personal"));
  if (!personal) return fail(personal.error());
  a.personal = std::move(*personal);
  return a;
}

json application_json(const ApplicationRequest& a) {
  json j = {{"kind", a.kind == contract::RecordKind::Need ? "need" : "support"},
            {"category", a.category},
            {"amount", a.amount},
            {"unit", a.unit},
            {"personal",
             {{"name", a.personal.name},
              {"phone", a.personal.phone},
              {"address", a.personal.address},
              {"notes", a.personal.notes}}}};
  if (a.kind == contract::RecordKind::Support) j["shipping"] = a.shipping;
  return j;
}

Expected<Transaction, std::string> tx_from_body(const json& j) {
  if (!j.is_object() || !j.contains("tx") || !j.at("tx").is_string())
    return fail(std::string("body must be {\"tx\": base64}"));
  auto raw = from_base64(j.at("tx").get<std::string>());
  if (!raw) return fail(std::string("tx is not valid base64"));
  try {
    return decode_transaction(*raw);
  } catch (const std::exception& e) {
    return fail(std::string("undecodable transaction: ") + e.what());
  }
}

json tx_body(const Transaction& tx) { return {{"tx", to_base64(encode_transaction(tx))}}; }

}  // namespace rmsd::api
