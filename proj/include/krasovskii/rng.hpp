#pragma once

// Deterministic sampling helpers. Distribution code is written out so the
// streams are identical across standard library implementations.

#include <cstdint>
#include <random>

namespace krasovskii {

/// Uniform double in [0, 1) with 53-bit resolution.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

}  // namespace krasovskii
