#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rmsd/privacy/store.hpp"
#include "test_support.hpp"

using namespace rmsd;
using namespace rmsd::privacy;
using rmsd::test::seeded_key;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("rmsd-" + tag + "-" + to_hex(new_personal_ref()).substr(0, 12));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PersonalRecord sample(std::mt19937_64& rng) {
  PersonalRecord r;
  r.name = rmsd::test::random_string(rng, 32);
  r.phone = rmsd::test::random_string(rng, 32);
  r.address = rmsd::test::random_string(rng, 32);
  r.notes = rmsd::test::random_string(rng, 32);
  r.collected_at = 1'700'000'000'000ULL;
  r.collected_by = seeded_key(0x60).public_key();
  return r;
}

struct Roles {
  KeyPair admin = rmsd::test::golden_admin();
  KeyPair checker = seeded_key(0x61);
  KeyPair creator = seeded_key(0x62);
  KeyPair nobody = seeded_key(0x63);
  contract::ContractState state;
  Roles() {
    state = contract::genesis_state(admin.public_key());
    state.roles[checker.public_key()] = Role::Checker;
    state.roles[creator.public_key()] = Role::Creator;
  }
};

}  // namespace

TEST_CASE("put then get returns the record to checkers and admins only") {
  TempDir dir("privacy");
  PrivacyStore store(dir.path, [] { return 42; });
  std::mt19937_64 rng(1);
  auto rec = sample(rng);
  auto ref = store.put(rec);
  REQUIRE(ref);
  rec.personal_ref = *ref;
  Roles roles;
  for (const auto* k : {&roles.checker, &roles.admin}) {
    auto got = store.get(roles.state, k->public_key(), *ref);
    REQUIRE(got);
    CHECK(*got == rec);
  }
  for (const auto* k : {&roles.creator, &roles.nobody}) {
    auto got = store.get(roles.state, k->public_key(), *ref);
    REQUIRE_FALSE(got);
    CHECK(got.error() == PrivacyError::Unauthorized);
  }
  CHECK(store.get(roles.state, roles.checker.public_key(), new_personal_ref()).error() ==
        PrivacyError::NotFound);
}

TEST_CASE("same data stored twice gets distinct refs") {
  TempDir dir("privacy");
  PrivacyStore store(dir.path);
  std::mt19937_64 rng(2);
  auto rec = sample(rng);
  auto a = store.put(rec), b = store.put(rec);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a != *b);
  CHECK(store.size() == 2);
}

TEST_CASE("validation rejects incomplete records without storing anything") {
  TempDir dir("privacy");
  PrivacyStore store(dir.path);
  PersonalRecord r;
  r.phone = "123";
  CHECK(store.put(r).error() == PrivacyError::Validation);
  r.name = "x";
  r.phone.clear();
  CHECK(store.put(r).error() == PrivacyError::Validation);
  CHECK(store.size() == 0);
  CHECK(slurp(store.db_path()).empty());
}

TEST_CASE("ref bytes never occur inside the personal fields") {
  TempDir dir("privacy");
  PrivacyStore store(dir.path);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    auto rec = sample(rng);
    auto ref = store.put(rec);
    REQUIRE(ref);
    std::string fields = rec.name + rec.phone + rec.address + rec.notes;
    std::string raw(reinterpret_cast<const char*>(ref->data.data()), ref->data.size());
    CHECK(fields.find(raw) == std::string::npos);
    CHECK(fields.find(to_hex(*ref)) == std::string::npos);
    // Nor is the ref a digest of the data.
    CHECK(sha256(fields) != *ref);
    CHECK(sha256(rec.name) != *ref);
  }
}

TEST_CASE("delete removes the record from disk; only admins may delete") {
  TempDir dir("privacy");
  Roles roles;
  std::mt19937_64 rng(4);
  auto keep = sample(rng), gone = sample(rng);
  Digest keep_ref, gone_ref;
  {
    PrivacyStore store(dir.path);
    keep_ref = *store.put(keep);
    gone_ref = *store.put(gone);
    CHECK(store.remove(roles.state, roles.checker.public_key(), gone_ref) ==
          PrivacyError::Unauthorized);
    CHECK(store.remove(roles.state, roles.admin.public_key(), gone_ref) == std::nullopt);
    CHECK(store.get(roles.state, roles.admin.public_key(), gone_ref).error() ==
          PrivacyError::NotFound);
    CHECK(store.remove(roles.state, roles.admin.public_key(), gone_ref) == PrivacyError::NotFound);
  }
  auto db = slurp(dir.path / "personal.db");
  for (const auto& v : {gone.name, gone.phone, gone.address, gone.notes})
    CHECK(db.find(v) == std::string::npos);
  CHECK(db.find(keep.name) != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir.path / "personal.db.tmp"));

  PrivacyStore reopened(dir.path);
  CHECK(reopened.size() == 1);
  CHECK(reopened.contains(keep_ref));
  CHECK_FALSE(reopened.contains(gone_ref));
}

TEST_CASE("rollback removes without role checks") {
  TempDir dir("privacy");
  PrivacyStore store(dir.path);
  std::mt19937_64 rng(5);
  auto ref = *store.put(sample(rng));
  CHECK(store.rollback(ref, seeded_key(0x70).public_key()) == std::nullopt);
  CHECK_FALSE(store.contains(ref));
  CHECK(store.rollback(ref, seeded_key(0x70).public_key()) == PrivacyError::NotFound);
}

TEST_CASE("stores are node-local") {
  TempDir a("privacy-a"), b("privacy-b");
  PrivacyStore sa(a.path), sb(b.path);
  std::mt19937_64 rng(6);
  auto ref = *sa.put(sample(rng));
  Roles roles;
  CHECK(sb.get(roles.state, roles.checker.public_key(), ref).error() == PrivacyError::NotFound);
}

TEST_CASE("every access is audited with ts, caller, ref and op") {
  TempDir dir("privacy");
  std::uint64_t t = 100;
  PrivacyStore store(dir.path, [&] { return t++; });
  Roles roles;
  std::mt19937_64 rng(7);
  auto rec = sample(rng);
  auto ref = *store.put(rec);
  (void)store.get(roles.state, roles.checker.public_key(), ref);
  (void)store.get(roles.state, roles.nobody.public_key(), ref);
  (void)store.remove(roles.state, roles.admin.public_key(), ref);

  std::ifstream in(store.audit_path());
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 4);
  std::vector<std::string> ops = {"put", "get", "get", "delete"};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(lines[i].at("ts") == 100 + i);
    CHECK(lines[i].at("op") == ops[i]);
    CHECK(lines[i].at("ref") == to_hex(ref));
  }
  CHECK(lines[1].at("caller") == to_hex(roles.checker.public_key()));
  CHECK(lines[2].at("result") == "Unauthorized");
  // The audit log names references, never the data.
  auto log = slurp(store.audit_path());
  CHECK(log.find(rec.name) == std::string::npos);
  CHECK(log.find(rec.phone) == std::string::npos);
}

TEST_CASE("chain built from applications stays valid and free of personal data after deletion") {
  TempDir dir("privacy");
  PrivacyStore store(dir.path);
  Roles roles;
  std::mt19937_64 rng(8);
  auto genesis = rmsd::test::default_genesis();
  auto ledger = *ledger::Ledger::from_genesis(genesis);
  std::vector<PersonalRecord> records;
  std::vector<Digest> refs;
  auto service = seeded_key(0x71);
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto rec = sample(rng);
    auto ref = *store.put(rec);
    records.push_back(rec);
    refs.push_back(ref);
    Payload p = i % 2 ? Payload{CreateSupport{"food", i + 1, "kg", "truck", ref}}
                      : Payload{CreateNeed{"water", i + 1, "L", ref}};
    REQUIRE_FALSE(ledger.append(rmsd::test::next_block(ledger, {make_transaction(service, i, p)})));
  }
  Bytes all;
  for (const auto& b : ledger.chain().blocks) {
    auto bytes = encode_block(b);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  std::string haystack(all.begin(), all.end());
  for (const auto& r : records)
    for (const auto& v : {r.name, r.phone, r.address, r.notes})
      CHECK(haystack.find(v) == std::string::npos);

  auto digest_before = contract::state_digest(ledger.state());
  for (const auto& ref : refs)
    CHECK(store.remove(roles.state, roles.admin.public_key(), ref) == std::nullopt);
  CHECK_FALSE(ledger::validate_chain(ledger.chain()).has_value());
  CHECK(contract::state_digest(ledger::replay_chain(ledger.chain())->state()) == digest_before);
}
