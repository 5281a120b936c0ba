#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace featvec {

// Error taxonomy, mirrored by the CLI exit codes:
//   ArgumentError -> 1, DataError -> 2, NumericError -> 3.
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; scrambles a 64-bit value.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-unit seed stream: work unit i (tree, row, feature, ...) gets its own
// seed so results do not depend on scheduling order.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    return mix64(seed ^ mix64(index + 1));
}

inline std::mt19937_64 make_engine(uint64_t seed) {
    return std::mt19937_64(mix64(seed));
}

// Worker count: explicit request > FEATVEC_THREADS env > OpenMP default.
int resolve_threads(int requested);

}  // namespace featvec
