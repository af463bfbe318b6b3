#pragma once

// Node-local store for applicant personal data. Nothing here is replicated;
// the chain only ever sees the opaque 32-byte reference.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "rmsd/contract.hpp"
#include "rmsd/crypto.hpp"
#include "rmsd/expected.hpp"

namespace rmsd::privacy {

struct PersonalRecord {
  Digest personal_ref;  // assigned by put()
  std::string name;
  std::string phone;
  std::string address;
  std::string notes;
  std::uint64_t collected_at = 0;  // ms since epoch
  Account collected_by;

  bool operator==(const PersonalRecord&) const = default;
};

enum class PrivacyError : std::uint8_t { Validation, Unauthorized, NotFound, StorageFailure };
std::string_view privacy_error_name(PrivacyError e);

/// Name is required, plus at least one way to reach the applicant.
std::optional<std::string> validate_personal(const PersonalRecord& r);

/// Fresh reference: digest of a random 32-byte secret, independent of the data.
Digest new_personal_ref();

class PrivacyStore {
 public:
  using Clock = std::function<std::uint64_t()>;

  /// Opens (creating if needed) personal.db and personal-access.log in `dir`.
  /// Throws std::runtime_error if the existing file cannot be parsed.
  explicit PrivacyStore(std::filesystem::path dir, Clock clock = {});

  /// Stores the record under a new reference and returns it.
  Expected<Digest, PrivacyError> put(PersonalRecord record);
  /// Stores under the caller-chosen record.personal_ref, which must be unused.
  Expected<Digest, PrivacyError> put_at(PersonalRecord record);
  /// Caller must be Checker or Admin in `state`.
  Expected<PersonalRecord, PrivacyError> get(const contract::ContractState& state,
                                             const Account& caller, const Digest& ref);
  /// Caller must be Admin in `state`. The record is gone from disk on return.
  std::optional<PrivacyError> remove(const contract::ContractState& state, const Account& caller,
                                     const Digest& ref);
  /// Unconditional removal by the owning node service, used to roll back a put
  /// whose transaction never reached the chain.
  std::optional<PrivacyError> rollback(const Digest& ref, const Account& service);

  bool contains(const Digest& ref) const;
  std::size_t size() const;

  const std::filesystem::path& db_path() const { return db_path_; }
  const std::filesystem::path& audit_path() const { return audit_path_; }

 private:
  void audit(const Account& caller, const Digest& ref, std::string_view op,
             std::string_view result);
  std::optional<PrivacyError> erase_locked(const Digest& ref);
  Expected<Digest, PrivacyError> store_locked(PersonalRecord record,
                                              std::unique_lock<std::shared_mutex>& lock);

  std::filesystem::path db_path_;
  std::filesystem::path audit_path_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::mutex audit_mutex_;
  std::map<Digest, PersonalRecord> records_;
};

}  // namespace rmsd::privacy
