// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace pilotbench {

// Derives the seed of an independent substream from a master seed. Streams
// used for different purposes carry different tags ("train", "valid",
// "eval", ...) so they can never collide; index/worker separate draws and
// workers within one purpose.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index = 0, std::uint64_t worker = 0);

// Deterministic random stream. Gaussian variates are produced by Box-Muller
// on the raw 64-bit engine output, so realizations depend only on the seed
// and not on standard-library distribution internals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard real Gaussian, N(0, 1).
  double normal();

  // Circularly symmetric complex Gaussian, CN(0, 1): real and imaginary
  // parts are independent N(0, 1/2).
  std::complex<double> cnormal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace pilotbench
