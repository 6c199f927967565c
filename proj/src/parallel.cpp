#include "edict/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace edict::parallel {

int max_threads() { return omp_get_max_threads(); }

void set_max_threads(int n) { omp_set_num_threads(n < 1 ? 1 : n); }

bool in_parallel_region() { return omp_in_parallel() != 0; }

int apply_thread_env() {
  if (const char* env = std::getenv("EDICT_THREADS"); env != nullptr && *env != '\0') {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1 && cap < max_threads()) set_max_threads(cap);
    } catch (const std::exception&) {
      // malformed values leave the OpenMP default in place
    }
  }
  return max_threads();
}

}  // namespace edict::parallel
