// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/parallel.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pilotbench::par {

namespace {

Exec g_exec = [] {
  const char* env = std::getenv("PILOT_SERIAL");
  if (env != nullptr && env[0] == '1') return Exec::serial;
#ifdef _OPENMP
  return Exec::openmp;
#else
  return Exec::serial;
#endif
}();

int g_max_threads = 0;  // 0 = runtime default

}  // namespace

Exec default_exec() { return g_exec; }
void set_default_exec(Exec e) { g_exec = e; }

int max_threads() {
#ifdef _OPENMP
  return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) { g_max_threads = n > 0 ? n : 0; }

void for_each(std::int64_t n, Exec exec,
              const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
  const int threads = max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

void for_each(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  for_each(n, g_exec, fn);
}

}  // namespace pilotbench::par
