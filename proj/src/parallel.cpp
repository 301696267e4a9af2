#include "dualpt/parallel.hpp"

#include <atomic>

namespace dualpt::parallel {

namespace {

int default_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> value{default_threads()};
  return value;
}

}  // namespace

int max_threads() { return thread_setting().load(std::memory_order_relaxed); }

void set_max_threads(int n) {
  thread_setting().store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace dualpt::parallel
