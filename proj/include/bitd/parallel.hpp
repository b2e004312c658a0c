#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bitd {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Index-parallel loop. Work items must write only to their own slot so the
// serial and parallel paths produce identical results.
template <class F>
void parallel_for(long n, F&& fn, bool parallel = true) {
#ifdef _OPENMP
    if (parallel && n > 1) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
#else
    (void)parallel;
#endif
    for (long i = 0; i < n; ++i) fn(i);
}

// splitmix64; used to derive independent per-run seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const char* s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace bitd
