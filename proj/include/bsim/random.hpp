// Counter-based randomness: every draw is a hash of the scenario seed and
// the identity of what it decides, so results do not depend on the order
// in which draws happen and are identical across standard libraries.

#pragma once

#include <bit>
#include <cstdint>

namespace bsim {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Uniform in [0, 1) with 53 bits of resolution.
constexpr double to_unit(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

inline std::uint64_t mix(std::uint64_t a, double b) { return mix(a, std::bit_cast<std::uint64_t>(b)); }

}  // namespace bsim
