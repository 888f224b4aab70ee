#ifndef IGEN_PARALLEL_HPP_
#define IGEN_PARALLEL_HPP_

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace igen {

// Every batched kernel takes an Exec. Serial is the reference path used by
// tests; Parallel runs the same loop under OpenMP. Reductions are blocked
// with a fixed block size, so Serial and Parallel produce bit-identical
// results and thread count never changes output.
enum class Exec { Serial, Parallel };

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

#ifdef _OPENMP
template <class Body>
void parallel_for(int64_t n, Exec exec, const Body& body) {
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) body(i);
  } else {
    for (int64_t i = 0; i < n; ++i) body(i);
  }
}
#else
template <class Body>
void parallel_for(int64_t n, Exec /*exec*/, const Body& body) {
  for (int64_t i = 0; i < n; ++i) body(i);
}
#endif

// Rows are reduced in blocks of this size regardless of Exec or thread
// count; the block partials are folded sequentially in block order.
inline constexpr int64_t kReduceBlockRows = 8;

inline int64_t reduce_block_count(int64_t rows) {
  return (rows + kReduceBlockRows - 1) / kReduceBlockRows;
}

}  // namespace igen

#endif  // IGEN_PARALLEL_HPP_
