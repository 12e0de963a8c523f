#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ornn {

// Error taxonomy mapped to CLI exit codes: UsageError -> 1,
// DataError -> 2, NumericError -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All stochastic components draw from this engine so a run is fully
// determined by its seed (single-threaded).
using Rng = std::mt19937_64;

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 step keeps derived streams decorrelated
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace ornn
