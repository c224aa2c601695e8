#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>

namespace qttfit {

/// splitmix64 finalizer. Used to derive independent, order-free seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a stream seed from a master seed and a list of stream keys.
/// seed_{k+1} = splitmix64(seed_k ^ splitmix64(key_k)), starting at the master seed.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t s = splitmix64(master);
  for (auto k : keys) s = splitmix64(s ^ splitmix64(k));
  return s;
}

inline std::uint64_t bits_of(double x) noexcept { return std::bit_cast<std::uint64_t>(x); }

}  // namespace qttfit
