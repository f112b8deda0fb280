#pragma once

#include <cstdint>
#include <random>

namespace hcw {

/// Per-path generator. Streams are derived deterministically from
/// (seed, stream index) so results do not depend on thread scheduling.
using Rng = std::mt19937_64;

Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Exp(rate) holding time; rate must be positive.
double exponential(Rng& rng, double rate);

}  // namespace hcw
