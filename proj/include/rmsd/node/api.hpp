#pragma once

// Wire-level pieces of the HTTP API shared by the node service and clients:
// request signing, JSON shapes, and application validation.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "rmsd/contract.hpp"
#include "rmsd/expected.hpp"
#include "rmsd/ledger.hpp"
#include "rmsd/privacy/store.hpp"

namespace rmsd::api {

inline constexpr std::string_view kKeyHeader = "X-Rmsd-Key";
inline constexpr std::string_view kTimestampHeader = "X-Rmsd-Timestamp";
inline constexpr std::string_view kSignatureHeader = "X-Rmsd-Signature";
inline constexpr std::uint64_t kAuthWindowSeconds = 60;

/// "METHOD\nPATH\nhex(sha256(body))\nTIMESTAMP"
std::string request_signing_string(std::string_view method, std::string_view path,
                                   std::string_view body, std::uint64_t timestamp);

struct AuthHeaders {
  std::string key;        // hex public key
  std::string timestamp;  // unix seconds
  std::string signature;  // hex
};

AuthHeaders sign_request(const KeyPair& key, std::string_view method, std::string_view path,
                         std::string_view body, std::uint64_t unix_seconds);

/// Returns the authenticated account, or a reason the headers were refused.
Expected<Account, std::string> verify_request(std::string_view key_hex,
                                              std::string_view timestamp,
                                              std::string_view signature_hex,
                                              std::string_view method, std::string_view path,
                                              std::string_view body, std::uint64_t now_seconds);

std::uint64_t unix_seconds_now();

// Error codes carried in {code, message} bodies.
inline constexpr std::string_view kValidationError = "ValidationError";
inline constexpr std::string_view kUnauthorized = "Unauthorized";
inline constexpr std::string_view kNotFound = "NotFound";
inline constexpr std::string_view kUnknownId = "UnknownId";
inline constexpr std::string_view kNoQuorum = "NoQuorum";
inline constexpr std::string_view kDuplicatePeer = "DuplicatePeer";
inline constexpr std::string_view kStorageFailure = "StorageFailure";

nlohmann::json error_body(std::string_view code, std::string_view message);

nlohmann::json need_json(const contract::NeedRecord& r);
/// Header fields, transaction summaries, config section, and the raw canonical bytes.
nlohmann::json block_json(const Block& b);
nlohmann::json support_json(const contract::SupportRecord& r);

enum class ReceiptStatus : std::uint8_t { Pending, Committed, Rejected };

struct Receipt {
  Digest tx_id;
  ReceiptStatus status = ReceiptStatus::Pending;
  std::uint64_t height = 0;  // Committed
  std::string reason;        // Rejected
  std::optional<Digest> personal_ref;
};

nlohmann::json receipt_json(const Receipt& r);
Expected<Receipt, std::string> receipt_from_json(const nlohmann::json& j);

/// Personal fields as they arrive from a form.
Expected<privacy::PersonalRecord, std::string> personal_from_json(const nlohmann::json& j);
nlohmann::json personal_json(const privacy::PersonalRecord& r);

/// A need or support application with its personal section.
struct ApplicationRequest {
  contract::RecordKind kind = contract::RecordKind::Need;
  std::string category;
  std::uint64_t amount = 0;
  std::string unit;
  std::string shipping;  // supports only
  privacy::PersonalRecord personal;
};

/// All-or-nothing validation; nothing is stored when this fails.
Expected<ApplicationRequest, std::string> parse_application(const nlohmann::json& j);
nlohmann::json application_json(const ApplicationRequest& a);

/// {"tx": base64} bodies used for client-signed transactions.
Expected<Transaction, std::string> tx_from_body(const nlohmann::json& j);
nlohmann::json tx_body(const Transaction& tx);

}  // namespace rmsd::api
