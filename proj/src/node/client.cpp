#include "rmsd/node/client.hpp"

#include <thread>

#include "httplib.h"

namespace rmsd::node {

using nlohmann::json;

std::string ApiResponse::error_code() const {
  if (unreachable()) return "Unavailable";
  if (body.is_object() && body.contains("code") && body.at("code").is_string())
    return body.at("code").get<std::string>();
  return "HTTP" + std::to_string(status);
}

std::string ApiResponse::error_message() const {
  if (body.is_object() && body.contains("message") && body.at("message").is_string())
    return body.at("message").get<std::string>();
  return unreachable() ? "node unreachable" : body.dump();
}

ApiClient::ApiClient(const std::string& endpoint, std::chrono::milliseconds read_timeout)
    : endpoint_(endpoint.find("://") == std::string::npos ? "http://" + endpoint : endpoint),
      http_(std::make_unique<httplib::Client>(endpoint_)) {
  http_->set_connection_timeout(std::chrono::seconds(2));
  http_->set_read_timeout(read_timeout);
  http_->set_write_timeout(std::chrono::seconds(10));
}

ApiClient::~ApiClient() = default;
ApiClient::ApiClient(ApiClient&&) noexcept = default;
ApiClient& ApiClient::operator=(ApiClient&&) noexcept = default;

namespace {

httplib::Headers auth_headers(const KeyPair* auth, const std::string& method,
                              const std::string& path, const std::string& body) {
  httplib::Headers h;
  if (!auth) return h;
  auto signed_headers = api::sign_request(*auth, method, path, body, api::unix_seconds_now());
  h.emplace(std::string(api::kKeyHeader), signed_headers.key);
  h.emplace(std::string(api::kTimestampHeader), signed_headers.timestamp);
  h.emplace(std::string(api::kSignatureHeader), signed_headers.signature);
  return h;
}

}  // namespace

ApiResponse ApiClient::finish(const void* opaque) {
  const auto& result = *static_cast<const httplib::Result*>(opaque);
  ApiResponse r;
  if (!result) return r;
  r.status = result->status;
  try {
    r.body = result->body.empty() ? json(nullptr) : json::parse(result->body);
  } catch (const json::exception&) {
    r.body = result->body;
  }
  return r;
}

ApiResponse ApiClient::get(const std::string& path, const KeyPair* auth) {
  auto res = http_->Get(path, auth_headers(auth, "GET", path, ""));
  return finish(&res);
}

ApiResponse ApiClient::post(const std::string& path, const json& body, const KeyPair* auth) {
  auto text = body.dump();
  auto res = http_->Post(path, auth_headers(auth, "POST", path, text), text, "application/json");
  return finish(&res);
}

ApiResponse ApiClient::del(const std::string& path, const KeyPair* auth) {
  auto res = http_->Delete(path, auth_headers(auth, "DELETE", path, ""));
  return finish(&res);
}

ApiResponse ApiClient::submit_application(const api::ApplicationRequest& app) {
  return post("/v1/applications", api::application_json(app));
}

ApiResponse ApiClient::submit_signed_application(const Transaction& tx,
                                                 const privacy::PersonalRecord& personal) {
  auto body = api::tx_body(tx);
  body["personal"] = {{"name", personal.name},
                      {"phone", personal.phone},
                      {"address", personal.address},
                      {"notes", personal.notes}};
  return post("/v1/applications", body);
}

ApiResponse ApiClient::submit_approval(const Transaction& tx) {
  return post("/v1/approvals", api::tx_body(tx));
}

ApiResponse ApiClient::submit_role(const Transaction& tx) {
  return post("/v1/admin/roles", api::tx_body(tx));
}

ApiResponse ApiClient::add_peer(const NodeId& node, const KeyPair& admin) {
  return post("/v1/admin/peers", {{"node", render_node_uri(node)}}, &admin);
}

ApiResponse ApiClient::chain() { return get("/v1/chain"); }

ApiResponse ApiClient::receipt(const Digest& tx_id) { return get("/v1/tx/" + to_hex(tx_id)); }

std::optional<std::uint64_t> ApiClient::next_nonce(const Account& account) {
  auto r = get("/v1/accounts/" + to_hex(account));
  if (!r.ok()) return std::nullopt;
  return r.body.at("next_nonce").get<std::uint64_t>();
}

ApiResponse ApiClient::wait_receipt(const Digest& tx_id, std::chrono::milliseconds timeout,
                                    std::chrono::milliseconds interval) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    auto r = receipt(tx_id);
    bool pending = r.ok() && r.body.value("status", "") == "Pending";
    bool retry = pending || r.unreachable();
    if (!retry || std::chrono::steady_clock::now() >= deadline) return r;
    std::this_thread::sleep_for(interval);
  }
}

}  // namespace rmsd::node
