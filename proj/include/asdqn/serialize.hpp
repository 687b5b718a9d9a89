#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "asdqn/neural.hpp"

namespace asdqn {

// Checkpoint layout, all integers and floats little-endian:
//
//   8 bytes   magic "ASDQNPRM"
//   u32       format version (1)
//   u32       number of layer dims D
//   D x u64   layer dims, input first
//   per layer: weights (out x in) row-major as f64, then bias (out) as f64

inline constexpr std::array<char, 8> kParamMagic{'A', 'S', 'D', 'Q', 'N', 'P', 'R', 'M'};
inline constexpr std::uint32_t kParamFormatVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw std::runtime_error("read_params: truncated input");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_params(std::ostream& os, const ParamSet& params) {
  os.write(kParamMagic.data(), kParamMagic.size());
  detail::write_le<std::uint32_t>(os, kParamFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.dims.size()));
  for (int d : params.dims) detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  for (std::size_t i = 0; i < params.num_params(); ++i) detail::write_le<double>(os, params.flat(i));
  if (!os) throw std::runtime_error("write_params: stream error");
}

inline ParamSet read_params(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kParamMagic) {
    throw std::runtime_error("read_params: bad magic");
  }
  if (detail::read_le<std::uint32_t>(is) != kParamFormatVersion) {
    throw std::runtime_error("read_params: unsupported format version");
  }
  const auto count = detail::read_le<std::uint32_t>(is);
  if (count < 2 || count > 1024) throw std::runtime_error("read_params: implausible layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto d = detail::read_le<std::uint64_t>(is);
    if (d < 1 || d > (1u << 24)) throw std::runtime_error("read_params: implausible layer width");
    dims.push_back(static_cast<int>(d));
  }
  ParamSet params(dims);
  for (std::size_t i = 0; i < params.num_params(); ++i) params.flat(i) = detail::read_le<double>(is);
  return params;
}

}  // namespace asdqn
