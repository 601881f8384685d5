#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"

namespace bsq {

/// Winding number of f around the circle |w - center| = radius, counterclockwise,
/// by summing phase increments. The sampling doubles (up to max_samples) until
/// every increment is below pi/2.
template <class Fn>
int winding_multiplicity(Fn&& f, cd center, double radius, int samples = 256, int max_samples = 4096) {
    for (int count = samples; count <= max_samples; count *= 2) {
        std::vector<cd> v(count);
        for (int k = 0; k < count; ++k) {
            v[k] = f(center + std::polar(radius, 2.0 * std::numbers::pi * k / count));
            if (!(std::abs(v[k]) >= 1e-13)) throw Error(ErrorKind::ZeroOnContour, "function vanishes on the contour");
        }
        double total = 0.0;
        bool smooth = true;
        for (int k = 0; k < count && smooth; ++k) {
            const double inc = std::arg(v[(k + 1) % count] / v[k]);
            smooth = std::abs(inc) < 0.5 * std::numbers::pi;
            total += inc;
        }
        if (smooth) return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
    }
    throw Error(ErrorKind::PhaseJump, "phase increments stay above pi/2 at the finest sampling");
}

}  // namespace bsq
