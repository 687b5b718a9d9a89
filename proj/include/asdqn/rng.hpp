#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace asdqn {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed splitting rule used everywhere a component needs its own stream:
///
///   h0 = splitmix64(master)
///   h1 = splitmix64(h0 ^ fnv1a64(role))
///   seed = splitmix64(h1 ^ replicate)
///
/// Distinct (role, replicate) pairs give statistically independent streams
/// from one experiment seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view role,
                                    std::uint64_t replicate = 0) noexcept {
  const std::uint64_t h0 = detail::splitmix64(master);
  const std::uint64_t h1 = detail::splitmix64(h0 ^ detail::fnv1a64(role));
  return detail::splitmix64(h1 ^ replicate);
}

inline Rng make_rng(std::uint64_t master, std::string_view role, std::uint64_t replicate = 0) {
  return Rng{derive_seed(master, role, replicate)};
}

// Uniform draws written out explicitly so streams do not depend on the
// standard library's distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n) by rejection sampling. n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace asdqn
