#include "featvec/common.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace featvec {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FEATVEC_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace featvec
