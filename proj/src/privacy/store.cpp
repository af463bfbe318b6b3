#include "rmsd/privacy/store.hpp"

#include <sodium.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>

#include "json.hpp"

namespace rmsd::privacy {

using nlohmann::json;

namespace {

std::uint64_t wall_clock_ms() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

json record_to_json(const PersonalRecord& r) {
  return {{"ref", to_hex(r.personal_ref)}, {"name", r.name},
          {"phone", r.phone},              {"address", r.address},
          {"notes", r.notes},              {"collected_at", r.collected_at},
          {"collected_by", to_hex(r.collected_by)}};
}

PersonalRecord record_from_json(const json& j) {
  PersonalRecord r;
  auto ref = fixed_from_hex<32>(j.at("ref").get<std::string>());
  auto by = fixed_from_hex<32>(j.at("collected_by").get<std::string>());
  if (!ref || !by) throw std::runtime_error("personal.db: bad hex field");
  r.personal_ref = *ref;
  r.collected_by = *by;
  r.name = j.at("name").get<std::string>();
  r.phone = j.at("phone").get<std::string>();
  r.address = j.at("address").get<std::string>();
  r.notes = j.at("notes").get<std::string>();
  r.collected_at = j.at("collected_at").get<std::uint64_t>();
  return r;
}

bool write_and_sync(std::FILE* f, const std::string& text) {
  if (std::fwrite(text.data(), 1, text.size(), f) != text.size()) return false;
  if (std::fflush(f) != 0) return false;
  return ::fsync(::fileno(f)) == 0;
}

bool append_line(const std::filesystem::path& path, const std::string& line) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) return false;
  bool ok = write_and_sync(f, line + "\n");
  return std::fclose(f) == 0 && ok;
}

bool replace_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) return false;
  bool ok = write_and_sync(f, text);
  if (std::fclose(f) != 0 || !ok) return false;
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  return !ec;
}

}  // namespace

std::string_view privacy_error_name(PrivacyError e) {
  switch (e) {
    case PrivacyError::Validation: return "ValidationError";
    case PrivacyError::Unauthorized: return "Unauthorized";
    case PrivacyError::NotFound: return "NotFound";
    case PrivacyError::StorageFailure: return "StorageFailure";
  }
  return "Unknown";
}

std::optional<std::string> validate_personal(const PersonalRecord& r) {
  if (r.name.empty()) return "name is required";
  if (r.phone.empty() && r.address.empty()) return "phone or address is required";
  return std::nullopt;
}

Digest new_personal_ref() {
  FixedBytes<32> secret;
  random_bytes(secret.data);
  auto ref = sha256(secret.view());
  sodium_memzero(secret.data.data(), secret.data.size());
  return ref;
}

PrivacyStore::PrivacyStore(std::filesystem::path dir, Clock clock)
    : db_path_(dir / "personal.db"),
      audit_path_(dir / "personal-access.log"),
      clock_(clock ? std::move(clock) : Clock(wall_clock_ms)) {
  std::filesystem::create_directories(dir);
  std::ifstream in(db_path_);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("personal.db: unparsable line " + std::to_string(lineno));
    auto r = record_from_json(j);
    records_[r.personal_ref] = std::move(r);
  }
}

void PrivacyStore::audit(const Account& caller, const Digest& ref, std::string_view op,
                         std::string_view result) {
  json j = {{"ts", clock_()},
            {"caller", to_hex(caller)},
            {"ref", to_hex(ref)},
            {"op", op},
            {"result", result}};
  std::lock_guard lock(audit_mutex_);
  append_line(audit_path_, j.dump());
}

Expected<Digest, PrivacyError> PrivacyStore::put(PersonalRecord record) {
  if (validate_personal(record)) return fail(PrivacyError::Validation);
  std::unique_lock lock(mutex_);
  do record.personal_ref = new_personal_ref();
  while (records_.contains(record.personal_ref));
  return store_locked(std::move(record), lock);
}

Expected<Digest, PrivacyError> PrivacyStore::put_at(PersonalRecord record) {
  if (validate_personal(record) || record.personal_ref == Digest{})
    return fail(PrivacyError::Validation);
  std::unique_lock lock(mutex_);
  if (records_.contains(record.personal_ref)) return fail(PrivacyError::Validation);
  return store_locked(std::move(record), lock);
}

Expected<Digest, PrivacyError> PrivacyStore::store_locked(PersonalRecord record,
                                                          std::unique_lock<std::shared_mutex>& lock) {
  const bool ok = append_line(db_path_, record_to_json(record).dump());
  if (ok) records_[record.personal_ref] = record;
  lock.unlock();
  audit(record.collected_by, record.personal_ref, "put", ok ? "ok" : "StorageFailure");
  if (!ok) return fail(PrivacyError::StorageFailure);
  return record.personal_ref;
}

Expected<PersonalRecord, PrivacyError> PrivacyStore::get(const contract::ContractState& state,
                                                         const Account& caller,
                                                         const Digest& ref) {
  auto role = contract::get_user_auth(state, caller);
  if (role != Role::Checker && role != Role::Admin) {
    audit(caller, ref, "get", "Unauthorized");
    return fail(PrivacyError::Unauthorized);
  }
  std::optional<PersonalRecord> found;
  {
    std::shared_lock lock(mutex_);
    auto it = records_.find(ref);
    if (it != records_.end()) found = it->second;
  }
  audit(caller, ref, "get", found ? "ok" : "NotFound");
  if (!found) return fail(PrivacyError::NotFound);
  return *found;
}

std::optional<PrivacyError> PrivacyStore::erase_locked(const Digest& ref) {
  auto it = records_.find(ref);
  if (it == records_.end()) return PrivacyError::NotFound;
  std::string text;
  for (const auto& [key, r] : records_)
    if (key != ref) text += record_to_json(r).dump() + "\n";
  if (!replace_file(db_path_, text)) return PrivacyError::StorageFailure;
  records_.erase(it);
  return std::nullopt;
}

std::optional<PrivacyError> PrivacyStore::remove(const contract::ContractState& state,
                                                 const Account& caller, const Digest& ref) {
  if (contract::get_user_auth(state, caller) != Role::Admin) {
    audit(caller, ref, "delete", "Unauthorized");
    return PrivacyError::Unauthorized;
  }
  std::optional<PrivacyError> err;
  {
    std::unique_lock lock(mutex_);
    err = erase_locked(ref);
  }
  audit(caller, ref, "delete", err ? privacy_error_name(*err) : "ok");
  return err;
}

std::optional<PrivacyError> PrivacyStore::rollback(const Digest& ref, const Account& service) {
  std::optional<PrivacyError> err;
  {
    std::unique_lock lock(mutex_);
    err = erase_locked(ref);
  }
  audit(service, ref, "rollback", err ? privacy_error_name(*err) : "ok");
  return err;
}

bool PrivacyStore::contains(const Digest& ref) const {
  std::shared_lock lock(mutex_);
  return records_.contains(ref);
}

std::size_t PrivacyStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

}  // namespace rmsd::privacy
