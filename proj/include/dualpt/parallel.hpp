#ifndef DUALPT_PARALLEL_HPP
#define DUALPT_PARALLEL_HPP

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dualpt::parallel {

// Number of worker threads the kernels may use. Defaults to the OpenMP
// runtime's maximum; 1 forces every kernel down the serial path.
int max_threads();
void set_max_threads(int n);
bool openmp_compiled();

// Runs body(i) for i in [0, count). Iterations must write disjoint outputs;
// any cross-iteration reduction has to happen after the loop, in index order,
// so results do not depend on the schedule or the thread count. `grain` is
// the minimum count worth a parallel region: region startup costs around as
// much as sweeping a whole small matrix, so tiny inner loops stay serial and
// the fan-out loops (per class, per sample, per solve) carry the speedup.
template <typename F>
void for_each(std::size_t count, F&& body, std::size_t grain = 1) {
#ifdef _OPENMP
  if (count > 1 && count >= grain && max_threads() > 1 && !omp_in_parallel()) {
    const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (long long i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace dualpt::parallel

#endif  // DUALPT_PARALLEL_HPP
