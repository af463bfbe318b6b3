#include "rmsd/crypto.hpp"

#include <sodium.h>

#include <stdexcept>

namespace rmsd {
namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

}  // namespace

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string to_base64(ByteView bytes) {
  ensure_sodium();
  const auto variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(out.size() - 1);  // drop terminating NUL
  return out;
}

std::optional<Bytes> from_base64(std::string_view text) {
  ensure_sodium();
  Bytes out(text.size() * 3 / 4 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0)
    return std::nullopt;
  if (end != text.data() + text.size()) return std::nullopt;
  out.resize(len);
  return out;
}

Digest sha256(ByteView bytes) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.data.data(), bytes.data(), bytes.size());
  return d;
}

Digest sha256(std::string_view text) {
  return sha256(ByteView{reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void random_bytes(std::span<std::uint8_t> out) {
  ensure_sodium();
  randombytes_buf(out.data(), out.size());
}

KeyPair KeyPair::generate() {
  FixedBytes<32> seed;
  random_bytes(seed.data);
  return from_seed(seed);
}

KeyPair KeyPair::from_seed(const FixedBytes<32>& seed) {
  ensure_sodium();
  KeyPair kp;
  kp.seed_ = seed;
  crypto_sign_seed_keypair(kp.public_key_.data.data(), kp.secret_.data(), seed.data.data());
  return kp;
}

std::optional<KeyPair> KeyPair::from_secret_hex(std::string_view hex) {
  auto seed = fixed_from_hex<32>(hex);
  if (!seed) return std::nullopt;
  return from_seed(*seed);
}

Signature KeyPair::sign(ByteView message) const {
  ensure_sodium();
  Signature sig;
  crypto_sign_detached(sig.data.data(), nullptr, message.data(), message.size(), secret_.data());
  return sig;
}

bool verify_signature(const PublicKey& key, ByteView message, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.data.data(), message.data(), message.size(),
                                     key.data.data()) == 0;
}

}  // namespace rmsd
