#pragma once

#include <cstddef>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "h2p/threads.hpp"

namespace h2p {

/// Flush subnormal results to zero on the current thread while in scope.
/// Propagated wavefunctions carry exponentially small tails; letting them
/// decay into subnormals slows the sweeps by an order of magnitude while
/// changing nothing above 1e-308.
class FlushSubnormals {
 public:
#if defined(__SSE2__)
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }  // FTZ | DAZ
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned int saved_;
#else
  FlushSubnormals() = default;
#endif
 public:
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;
};

/// Run body(k) for k in [0, n) over disjoint indices. Bodies must only
/// write to data owned by index k. The single-thread case goes through the
/// same parallel region so the compiler emits one instance of the body, and
/// results are bit identical for any thread count.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const int threads = n < 2 ? 1 : worker_threads();
#pragma omp parallel num_threads(threads)
  {
    FlushSubnormals ftz;
#pragma omp for schedule(static)
    for (std::size_t k = 0; k < n; ++k) body(k);
  }
}

}  // namespace h2p
