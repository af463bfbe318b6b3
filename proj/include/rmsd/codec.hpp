#pragma once

// Canonical binary encoding shared by every on-chain structure:
// big-endian fixed-width unsigned integers, UTF-8 strings with a 32-bit
// length prefix, digests and keys as raw bytes.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rmsd/crypto.hpp"

namespace rmsd::codec {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { be(v, 2); }
  void u32(std::uint32_t v) { be(v, 4); }
  void u64(std::uint64_t v) { be(v, 8); }
  void str(std::string_view s);
  void bytes(ByteView b);  // length-prefixed
  void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
  template <std::size_t N>
  void fixed(const FixedBytes<N>& v) {
    raw(v.view());
  }

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  void be(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
  std::uint64_t u64() { return be(8); }
  std::string str();
  Bytes bytes();
  template <std::size_t N>
  FixedBytes<N> fixed() {
    need(N);
    FixedBytes<N> v;
    std::copy(in_.begin() + pos_, in_.begin() + pos_ + N, v.data.begin());
    pos_ += N;
    return v;
  }

  bool done() const { return pos_ == in_.size(); }
  void expect_done() const {
    if (!done()) throw DecodeError("trailing bytes after value");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("unexpected end of input");
  }
  std::uint64_t be(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace rmsd::codec
