#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "factrank/error.hpp"

namespace factrank::bin {

// Little-endian fixed-width encoding shared by the bundle, model and
// embedding formats.

template <typename T>
  requires std::is_arithmetic_v<T>
void put(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(buf, sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T get(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw Error("unexpected end of binary stream");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(buf[i]) << (8 * i);
  }
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

inline void put_string(std::ostream& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::size_t max_len = 1u << 24) {
  const auto n = get<std::uint32_t>(in);
  if (n > max_len) throw Error("binary string length out of range");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw Error("unexpected end of binary stream");
  return s;
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw Error(std::string("not a ") + std::string(what) + " file (bad magic)");
  }
}

}  // namespace factrank::bin
