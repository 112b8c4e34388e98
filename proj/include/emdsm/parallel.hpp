#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace emdsm {

/// Applies the EMDSM_THREADS cap, if set, and returns the thread count in use.
inline int configure_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("EMDSM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // ignored: malformed values leave the runtime default
    }
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace emdsm
