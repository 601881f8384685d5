#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <utility>

#include "errors.hpp"

namespace bsq {

using cd = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Real inner product of R^2 written on complex numbers: Re(conj(a) b).
inline double pairing(cd a, cd b) { return std::real(std::conj(a) * b); }

/// Period lattice Z e1 + Z e2 together with its dual (frequencies that pair to 2 pi Z).
struct Lattice {
    cd e1{1.0, 0.0};
    cd e2{0.0, 1.0};
    cd e1_dual{two_pi, 0.0};
    cd e2_dual{0.0, two_pi};

    /// Signed cell area Im(conj(e1) e2).
    double area() const { return std::imag(std::conj(e1) * e2); }
    cd point(double s, double t) const { return s * e1 + t * e2; }
    cd dual_point(double m, double n) const { return m * e1_dual + n * e2_dual; }

    /// Coordinates (s, t) of x in the period basis.
    std::pair<double, double> coords(cd x) const {
        return {pairing(e1_dual, x) / two_pi, pairing(e2_dual, x) / two_pi};
    }
    /// Coordinates (m, n) of w in the dual basis.
    std::pair<double, double> dual_coords(cd w) const {
        return {pairing(w, e1) / two_pi, pairing(w, e2) / two_pi};
    }
};

inline Lattice make_lattice(cd e1, cd e2) {
    const double im = std::imag(std::conj(e1) * e2);
    if (!(std::abs(im) >= 1e-14 * std::abs(e1) * std::abs(e2)) || std::abs(e1) == 0.0 || std::abs(e2) == 0.0) {
        throw Error(ErrorKind::DegenerateLattice, "periods are R-linearly dependent");
    }
    const cd i{0.0, 1.0};
    Lattice l;
    l.e1 = e1;
    l.e2 = e2;
    l.e1_dual = two_pi * e2 / (i * im);
    l.e2_dual = -two_pi * e1 / (i * im);
    return l;
}

/// Largest deviation of the pairing matrix from 2 pi times the identity.
inline double pairing_defect(const Lattice& l) {
    const cd d[2] = {l.e1_dual, l.e2_dual};
    const cd e[2] = {l.e1, l.e2};
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
            const double target = j == k ? two_pi : 0.0;
            worst = std::max(worst, std::abs(pairing(d[j], e[k]) - target));
        }
    }
    return worst;
}

namespace detail {

// Minimal-norm representative of w modulo the lattice spanned by (f1, f2);
// (p, q) are the coordinates of w in that basis. Ties prefer a nonnegative
// real part, then a nonnegative imaginary part.
inline cd reduce_mod(cd w, cd f1, cd f2, double p, double q) {
    const double p0 = std::round(p);
    const double q0 = std::round(q);
    cd best = w;
    double best_norm = std::numeric_limits<double>::infinity();
    const double tie = 1e-12 * (1.0 + std::abs(w));
    for (int dm = -2; dm <= 2; ++dm) {
        for (int dn = -2; dn <= 2; ++dn) {
            const cd cand = w - (p0 + dm) * f1 - (q0 + dn) * f2;
            const double nrm = std::abs(cand);
            bool take = nrm < best_norm - tie;
            if (!take && std::abs(nrm - best_norm) <= tie) {
                const auto key = [](cd c) {
                    return std::pair{c.real() >= -1e-15 ? 1 : 0, c.imag() >= -1e-15 ? 1 : 0};
                };
                take = key(cand) > key(best);
            }
            if (take) {
                best = cand;
                best_norm = nrm;
            }
        }
    }
    return best;
}

}  // namespace detail

/// Floquet shift reduced to the minimal-norm representative modulo the dual lattice.
inline cd reduce_shift(const Lattice& l, cd theta) {
    const auto [m, n] = l.dual_coords(theta);
    const cd r = detail::reduce_mod(theta, l.e1_dual, l.e2_dual, m, n);
    // Snap round-off residue so exact lattice shifts compare equal to zero.
    const double scale = std::max(std::abs(l.e1_dual), std::abs(l.e2_dual));
    return std::abs(r) < 1e-13 * scale ? cd(0.0) : r;
}

/// Distance from w to the dual lattice.
inline double dual_distance(const Lattice& l, cd w) { return std::abs(reduce_shift(l, w)); }

/// Distance from x to the period lattice.
inline double period_distance(const Lattice& l, cd x) {
    const auto [s, t] = l.coords(x);
    return std::abs(detail::reduce_mod(x, l.e1, l.e2, s, t));
}

}  // namespace bsq
