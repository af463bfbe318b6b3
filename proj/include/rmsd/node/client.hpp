#pragma once

// Thin client for the node HTTP API.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "rmsd/node/api.hpp"

namespace httplib {
class Client;
}

namespace rmsd::node {

struct ApiResponse {
  /// HTTP status, or 0 when the node could not be reached.
  int status = 0;
  nlohmann::json body;

  bool ok() const { return status >= 200 && status < 300; }
  bool unreachable() const { return status == 0; }
  /// `code` of an error body, "Unavailable" when unreachable.
  std::string error_code() const;
  std::string error_message() const;
};

class ApiClient {
 public:
  /// "http://host:port" or "host:port".
  explicit ApiClient(const std::string& endpoint,
                     std::chrono::milliseconds read_timeout = std::chrono::seconds(30));
  ~ApiClient();
  ApiClient(ApiClient&&) noexcept;
  ApiClient& operator=(ApiClient&&) noexcept;

  /// Requests signed with `auth` carry the authentication headers.
  ApiResponse get(const std::string& path, const KeyPair* auth = nullptr);
  ApiResponse post(const std::string& path, const nlohmann::json& body,
                   const KeyPair* auth = nullptr);
  ApiResponse del(const std::string& path, const KeyPair* auth = nullptr);

  // Typed helpers.
  ApiResponse submit_application(const api::ApplicationRequest& app);
  /// Applicant-signed creation; `personal` rides along in the same request.
  ApiResponse submit_signed_application(const Transaction& tx, const privacy::PersonalRecord& personal);
  ApiResponse submit_approval(const Transaction& tx);
  ApiResponse submit_role(const Transaction& tx);
  ApiResponse add_peer(const NodeId& node, const KeyPair& admin);
  ApiResponse chain();
  ApiResponse receipt(const Digest& tx_id);
  /// Next nonce the node would assign to `account`.
  std::optional<std::uint64_t> next_nonce(const Account& account);

  /// Polls /v1/tx until the receipt leaves Pending or `timeout` passes.
  ApiResponse wait_receipt(const Digest& tx_id, std::chrono::milliseconds timeout,
                           std::chrono::milliseconds interval = std::chrono::milliseconds(50));

  const std::string& endpoint() const { return endpoint_; }

 private:
  ApiResponse finish(const void* result);

  std::string endpoint_;
  std::unique_ptr<httplib::Client> http_;
};

}  // namespace rmsd::node
