#ifndef AWE_BINARY_IO_HPP_
#define AWE_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian primitives shared by the AWEF/AWEP/AWEE file formats.
namespace awe::binio {

template <typename UInt>
void put_uint(std::ostream& os, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes, sizeof(UInt));
}

template <typename UInt>
UInt get_uint(std::istream& is) {
  unsigned char bytes[sizeof(UInt)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) throw std::runtime_error("unexpected end of file");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

inline void put_f32(std::ostream& os, float f) { put_uint<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_uint<std::uint32_t>(is)); }
inline void put_f64(std::ostream& os, double d) { put_uint<std::uint64_t>(os, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_uint<std::uint64_t>(is)); }

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
  char got[4];
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw std::runtime_error(what + ": bad magic, expected \"" + std::string(magic) + "\"");
}

}  // namespace awe::binio

#endif  // AWE_BINARY_IO_HPP_
