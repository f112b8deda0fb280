#include "hcw/rng.hpp"

#include <cmath>

namespace hcw {

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x68637721u};
  return Rng(seq);
}

double exponential(Rng& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

}  // namespace hcw
