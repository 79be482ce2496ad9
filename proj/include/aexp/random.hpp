// Deterministic seed derivation for reproducible noise streams.
#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>

namespace aexp {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of words into one well-mixed seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (const auto w : words) h = splitmix64(h ^ w);
  return h;
}

inline std::uint64_t bits_of(double v) noexcept {
  if (v == 0.0) v = 0.0;
  return std::bit_cast<std::uint64_t>(v);
}

}  // namespace aexp
