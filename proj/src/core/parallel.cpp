#include "shearo/core/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace shearo {

int max_threads() {
  static const int cached = [] {
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("SHEARO_THREADS")) {
      try {
        const int cap = std::stoi(env);
        if (cap >= 1 && cap < n) n = cap;
      } catch (...) {
        // ignore unparseable values, keep the hardware default
      }
    }
    return n;
  }();
  return cached;
}

void init_threads() { omp_set_num_threads(max_threads()); }

}  // namespace shearo
