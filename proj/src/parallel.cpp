#include "sodef/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sodef::par {

int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("SODEF_NUM_THREADS")) {
            try {
                int v = std::stoi(env);
                if (v >= 1) return v;
            } catch (...) {
                // fall through to the OpenMP default
            }
        }
#ifdef _OPENMP
        return omp_get_max_threads();
#else
        return 1;
#endif
    }();
    return cached;
}

}  // namespace sodef::par
