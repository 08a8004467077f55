#pragma once

#include <cstdint>
#include <initializer_list>

namespace akalls {

/// SplitMix64 finalizer. Used to derive independent seeds and
/// counter-based uniforms without shared generator state.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Uniform double in [0, 1) from a 64-bit word (53 high bits).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stream tags for seed derivation.
inline constexpr std::uint64_t kPoolStream = 0x504f4f4cULL;
inline constexpr std::uint64_t kLabelStream = 0x4c41424cULL;
inline constexpr std::uint64_t kEvalStream = 0x4556414cULL;
inline constexpr std::uint64_t kBaselineStream = 0x42415345ULL;

}  // namespace akalls
