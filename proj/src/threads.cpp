#include "graphvec/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace graphvec {

namespace {

int read_cap() {
  const int hw = omp_get_max_threads();
  const char* env = std::getenv("GRAPHVEC_THREADS");
  if (env == nullptr || *env == '\0') return hw;
  try {
    const int cap = std::stoi(std::string(env));
    if (cap >= 1 && cap < hw) return cap;
  } catch (...) {
    // Unparsable values fall through to the hardware default.
  }
  return hw;
}

}  // namespace

int worker_threads() {
  static const int cached = read_cap();
  return cached;
}

int worker_threads_fresh() { return read_cap(); }

}  // namespace graphvec
