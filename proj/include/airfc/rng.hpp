#pragma once

#include "airfc/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace airfc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent child seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `(parent, labels...)`. Pure; identical inputs give identical seeds.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> labels) {
    std::uint64_t s = splitmix64(parent);
    for (auto label : labels) s = splitmix64(s ^ splitmix64(label + 0x632be59bd9b4e019ULL));
    return s;
}

/// Circularly symmetric complex Gaussian with E|z|^2 = variance.
inline cdouble complex_gaussian(Rng& rng, double variance = 1.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline CMatrix complex_gaussian_matrix(Rng& rng, Index rows, Index cols, double variance = 1.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    CMatrix m(rows, cols);
    // column-major fill order is part of the determinism contract
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            const double re = nd(rng);
            const double im = nd(rng);
            m(i, j) = {re, im};
        }
    return m;
}

inline CVector complex_gaussian_vector(Rng& rng, Index n, double variance = 1.0) {
    return complex_gaussian_matrix(rng, n, 1, variance);
}

}  // namespace airfc
