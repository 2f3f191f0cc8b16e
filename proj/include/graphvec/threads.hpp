#pragma once

namespace graphvec {

// Worker-thread cap honoring the GRAPHVEC_THREADS environment variable.
// Returns min(omp_get_max_threads(), GRAPHVEC_THREADS) when the variable is a
// positive integer, otherwise omp_get_max_threads().  All parallel regions in
// the library request exactly this many threads.
int worker_threads();

// Re-reads the environment (used by tests; worker_threads() caches).
int worker_threads_fresh();

}  // namespace graphvec
