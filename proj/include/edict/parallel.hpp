#pragma once

#include <cstddef>

namespace edict::parallel {

// Element count at which the dispatching kernels switch to OpenMP.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

int max_threads();
void set_max_threads(int n);
bool in_parallel_region();

// Reads EDICT_THREADS and caps the OpenMP team size accordingly. Returns the
// resulting cap.
int apply_thread_env();

}  // namespace edict::parallel
