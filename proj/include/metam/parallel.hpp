#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace metam {

// Data-parallel kernels run through this helper with per-index bodies that are
// independent of each other, so the parallel path is bit-identical to the
// serial one. Tests pin that down by running both.
template <class F>
void parallel_for(std::size_t n, bool parallel, F&& body) {
#ifdef _OPENMP
    if (parallel && n > 1) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            body(static_cast<std::size_t>(i));
        }
        return;
    }
#else
    (void)parallel;
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace metam
