#pragma once

// Little-endian encode/decode helpers shared by the container formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace ctsynth::detail {

template <typename T>
T byteswap_value(T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return byteswap_value(v);
}

template <typename T>
void put_le(std::vector<char>& out, T v) {
  v = to_le(v);
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return to_le(v);
}

template <typename T>
void put_le_array(std::vector<char>& out, std::span<const T> values) {
  const size_t start = out.size();
  out.resize(start + values.size_bytes());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + start, values.data(), values.size_bytes());
  } else {
    for (size_t i = 0; i < values.size(); ++i) {
      T v = byteswap_value(values[i]);
      std::memcpy(out.data() + start + i * sizeof(T), &v, sizeof(T));
    }
  }
}

template <typename T>
void get_le_array(const char* p, std::span<T> values) {
  std::memcpy(values.data(), p, values.size_bytes());
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : values) v = byteswap_value(v);
  }
}

inline void put_bytes(std::vector<char>& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

}  // namespace ctsynth::detail
