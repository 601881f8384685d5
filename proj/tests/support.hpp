#pragma once

#include <complex>
#include <random>
#include <vector>

#include <bsq/torus_field.hpp>

namespace bsq::test {

/// Random trigonometric polynomial with |m|,|n| <= band and coefficient decay.
inline TorusField random_field(const Lattice& lattice, int n, int band, std::mt19937_64& rng, double scale = 1.0,
                               bool zero_mean = true, cd theta = 0.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<cd> c(static_cast<std::size_t>(n) * n);
    for (int m = -band; m <= band; ++m) {
        for (int q = -band; q <= band; ++q) {
            if (zero_mean && m == 0 && q == 0) continue;
            const double decay = scale / (1.0 + m * m + q * q);
            c[storage_index(m, n) * n + storage_index(q, n)] = decay * cd(g(rng), g(rng));
        }
    }
    return TorusField::from_coeffs(lattice, n, std::move(c), theta);
}

inline double max_abs_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

inline double max_abs(const std::vector<cd>& a) {
    double d = 0.0;
    for (const cd& v : a) d = std::max(d, std::abs(v));
    return d;
}

}  // namespace bsq::test
