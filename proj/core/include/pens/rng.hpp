#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pens {

/// The generator used everywhere randomness is needed.
using Rng = std::mt19937_64;

/// FNV-1a over the bytes of `name`.
std::uint64_t hash_name(std::string_view name);

/// Derive an independent child seed from a root seed and a name, e.g.
/// derive_seed(root, "member:claims").
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
/// Used instead of std::uniform_real_distribution so results do not depend
/// on the standard library implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// In-place Fisher-Yates shuffle.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace pens
