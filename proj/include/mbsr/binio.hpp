#pragma once

// Little-endian binary helpers shared by the bgrid, transform and checkpoint
// formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mbsr/error.hpp"

namespace mbsr::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("binary stream truncated");
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::uint32_t max_len = 1u << 20) {
  const auto n = get<std::uint32_t>(is);
  if (n > max_len) throw Error("binary stream: string length " + std::to_string(n) + " too large");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw Error("binary stream truncated in string");
  return s;
}

template <typename T>
void put_array(std::ostream& os, const T* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void get_array(std::istream& is, T* data, std::size_t n) {
  if (n > 0 && !is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T))))
    throw Error("binary stream truncated in array payload");
}

}  // namespace mbsr::binio
