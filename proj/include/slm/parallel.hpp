// Sentence-level parallel loop. jobs <= 1 runs the serial reference path;
// otherwise an OpenMP loop with dynamic scheduling. Exceptions are captured
// per index and the lowest-index one is rethrown after the loop.

#ifndef SLM_PARALLEL_HPP
#define SLM_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <vector>

namespace slm {

template <class F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
    for (long i = 0; i < count; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace slm

#endif
