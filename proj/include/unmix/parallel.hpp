#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace unmix::par {

// Runtime switch for the OpenMP kernels. Deterministic mode forces serial
// execution so batch-internal reductions happen in a fixed order.
void set_enabled(bool on);
bool enabled();
int max_threads();

template <class F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
    if (enabled() && n > 1) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

// Serial reference loop, kept explicit so tests and the benchmark can compare
// the OpenMP path against it.
template <class F>
void serial_for(std::size_t n, F&& body) {
    for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace unmix::par
