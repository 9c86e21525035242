// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/rng.hpp"

#include <cmath>
#include <numbers>

namespace pilotbench {

namespace {

// splitmix64 finalizer; good avalanche for seed derivation.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index, std::uint64_t worker) {
  std::uint64_t h = mix64(master ^ fnv1a(tag));
  h = mix64(h ^ index);
  h = mix64(h ^ (worker * 0x9e3779b97f4a7c15ULL + 1));
  return h;
}

double RngStream::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::complex<double> RngStream::cnormal() {
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-std::log(u1));
  return {r * std::cos(2.0 * std::numbers::pi * u2),
          r * std::sin(2.0 * std::numbers::pi * u2)};
}

}  // namespace pilotbench
