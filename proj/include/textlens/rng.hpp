#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace textlens {

// Every randomized operation in the library draws through these helpers
// rather than <random> distributions, whose output the standard leaves
// implementation-defined. Same seed, same bytes, on any platform.

inline std::uint64_t bounded_u64(std::mt19937_64& rng, std::uint64_t bound) {
    // rejection sampling, no modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

// Uniform double in [0, 1).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline bool coin(std::mt19937_64& rng) {
    return (rng() >> 63) != 0;
}

template <class T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
    // Fisher-Yates; std::shuffle's draw sequence is not pinned by the standard
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded_u64(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace textlens
