#include "rmsd/codec.hpp"

#include <limits>

namespace rmsd::codec {

void Writer::str(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("string too long");
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void Writer::bytes(ByteView b) {
  if (b.size() > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("bytes too long");
  u32(static_cast<std::uint32_t>(b.size()));
  raw(b);
}

std::string Reader::str() {
  auto n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(in_.data()) + pos_, n);
  pos_ += n;
  return s;
}

Bytes Reader::bytes() {
  auto n = u32();
  need(n);
  Bytes b(in_.begin() + pos_, in_.begin() + pos_ + n);
  pos_ += n;
  return b;
}

}  // namespace rmsd::codec
