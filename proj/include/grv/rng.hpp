#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <vector>

namespace grv {

// SplitMix64 step; used to derive independent per-task seeds from (seed, task ids).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Hash a seed with a list of task indices (run, dataset, permutation, ...) into a
// stream seed. Tasks get statistically independent streams regardless of the order
// or the thread they are executed on, which is what makes every permutation loop
// and every simulation schedule-independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = splitmix64(seed);
    for (std::uint64_t id : ids) s = splitmix64(s ^ id);
    return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
    return std::mt19937_64(derive_seed(seed, ids));
}

// Uniform in [0,1) from the top 53 bits; avoids the implementation-defined behavior
// of std::uniform_real_distribution so streams are reproducible across toolchains.
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

// Unbiased integer in [0, n) by rejection on the top bits.
inline std::uint64_t uniform_below(std::mt19937_64& eng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return x % n;
}

// Fisher-Yates; self-contained so permutation streams do not depend on the standard
// library's std::shuffle implementation.
inline void shuffle_indices(std::vector<int>& idx, std::mt19937_64& eng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(eng, i));
        std::swap(idx[i - 1], idx[j]);
    }
}

inline std::vector<int> random_permutation(int n, std::mt19937_64& eng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    shuffle_indices(idx, eng);
    return idx;
}

}  // namespace grv
