#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian primitives shared by the embedding and checkpoint formats.
namespace claimgraph::binio {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::uint32_t limit = 1u << 30) {
  const std::uint32_t n = get_u32(in);
  if (n > limit) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError("unexpected end of file");
  return s;
}

inline void expect_magic(std::istream& in, const std::string& magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw FormatError("bad magic, expected " + magic);
  }
}

}  // namespace claimgraph::binio
