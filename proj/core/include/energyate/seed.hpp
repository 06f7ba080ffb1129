#pragma once

#include <cstdint>
#include <string_view>

namespace energyate {

/// Deterministic sub-seed for a named component, so one user-facing seed
/// drives every random stream without the streams overlapping.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace energyate
