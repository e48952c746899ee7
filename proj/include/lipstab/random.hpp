#pragma once

#include <cstdint>
#include <random>

namespace lipstab {

/// Generator for sample `index` of a run seeded with `seed`; independent of scheduling.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                  static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6c697073u};
  return std::mt19937_64(s);
}

}  // namespace lipstab
