#pragma once

// Seeded random streams. Every random artifact draws from its own engine,
// derived from (seed, stream, substream) by SplitMix64 mixing, so that e.g.
// changing the missing-data fraction leaves the generated factors and noise
// untouched.

#include <cstdint>
#include <random>

namespace cpwopt {

using Engine = std::mt19937_64;

enum class Stream : std::uint64_t {
  factors = 1,
  noise = 2,
  mask = 3,
  init = 4,    // substream = start number
  nvecs = 5,   // substream = mode
  instance = 6,
};

/// One SplitMix64 step.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Deterministic seed for (seed, stream, substream).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                        std::uint64_t substream = 0) noexcept;

[[nodiscard]] Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t substream = 0);

}  // namespace cpwopt
