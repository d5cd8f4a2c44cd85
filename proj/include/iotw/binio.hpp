#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "iotw/errors.hpp"

// Little-endian primitives for the model containers, plus FNV-1a hashing
// used for vocabulary/encoder fingerprints and file checksums. Byte order
// is composed explicitly so the files are portable.
namespace iotw::binio {

inline void write_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void write_f64(std::ostream& out, double v) {
  write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void write_string(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t read_u8(std::istream& in) {
  int c = in.get();
  if (c == EOF) throw RuntimeFailure("binio: unexpected end of file");
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& in) {
  char b[4];
  in.read(b, 4);
  if (in.gcount() != 4) throw RuntimeFailure("binio: unexpected end of file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  char b[8];
  in.read(b, 8);
  if (in.gcount() != 8) throw RuntimeFailure("binio: unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_u64(in));
}

inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw RuntimeFailure("binio: unexpected end of file");
  return s;
}

class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 1099511628211ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

}  // namespace iotw::binio
