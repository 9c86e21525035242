// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

namespace pilotbench::par {

enum class Exec { serial, openmp };

// Global execution policy. The serial path is the reference implementation;
// the OpenMP path must produce bit-identical results for any kernel that
// writes only to caller-owned per-index slots. PILOT_SERIAL=1 in the
// environment selects the serial path at startup.
Exec default_exec();
void set_default_exec(Exec e);

int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0, n). Each invocation must be independent of the
// others and write results only to slots owned by index i.
void for_each(std::int64_t n, Exec exec,
              const std::function<void(std::int64_t)>& fn);
void for_each(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace pilotbench::par
