#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rmsd {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <std::size_t N>
struct FixedBytes {
  std::array<std::uint8_t, N> data{};

  static constexpr std::size_t size() { return N; }
  const std::uint8_t* begin() const { return data.data(); }
  const std::uint8_t* end() const { return data.data() + N; }
  ByteView view() const { return {data.data(), N}; }
  bool is_zero() const {
    for (auto b : data)
      if (b != 0) return false;
    return true;
  }

  auto operator<=>(const FixedBytes&) const = default;
};

/// SHA-256 output.
using Digest = FixedBytes<32>;
/// Ed25519 public key; doubles as the account identifier on chain.
using PublicKey = FixedBytes<32>;
using Signature = FixedBytes<64>;
using Account = PublicKey;

std::string to_hex(ByteView bytes);
template <std::size_t N>
std::string to_hex(const FixedBytes<N>& v) {
  return to_hex(v.view());
}
std::optional<Bytes> from_hex(std::string_view hex);

template <std::size_t N>
std::optional<FixedBytes<N>> fixed_from_hex(std::string_view hex) {
  auto raw = from_hex(hex);
  if (!raw || raw->size() != N) return std::nullopt;
  FixedBytes<N> out;
  std::copy(raw->begin(), raw->end(), out.data.begin());
  return out;
}

std::string to_base64(ByteView bytes);
std::optional<Bytes> from_base64(std::string_view text);

Digest sha256(ByteView bytes);
Digest sha256(std::string_view text);

/// Fills `out` with cryptographically secure random bytes.
void random_bytes(std::span<std::uint8_t> out);

class KeyPair {
 public:
  /// Fresh key from the system CSPRNG.
  static KeyPair generate();
  /// Deterministic key derived from a 32-byte seed (Ed25519 RFC 8032 seed).
  static KeyPair from_seed(const FixedBytes<32>& seed);
  static std::optional<KeyPair> from_secret_hex(std::string_view hex);

  const PublicKey& public_key() const { return public_key_; }
  /// The 32-byte seed; serialising this is enough to restore the key.
  const FixedBytes<32>& seed() const { return seed_; }

  Signature sign(ByteView message) const;

 private:
  PublicKey public_key_;
  FixedBytes<32> seed_;
  std::array<std::uint8_t, 64> secret_{};
};

bool verify_signature(const PublicKey& key, ByteView message, const Signature& sig);

}  // namespace rmsd
