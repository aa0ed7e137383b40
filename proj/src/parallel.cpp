#include "unmix/parallel.hpp"

namespace unmix::par {

namespace {
bool g_enabled = true;
}

void set_enabled(bool on) { g_enabled = on; }

bool enabled() { return g_enabled; }

int max_threads() {
#ifdef _OPENMP
    return g_enabled ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

}  // namespace unmix::par
