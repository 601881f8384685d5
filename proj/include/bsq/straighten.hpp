#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "torus_field.hpp"

namespace bsq {

/// Z = d/dzbar + g d/dz on the source torus, with sup|g| < 1.
struct EllipticField {
    TorusField g;
    double amplitude_bound = 0.0;
};

inline EllipticField make_elliptic_field(TorusField g) {
    const double bound = g.sup_norm();
    if (!(bound < 1.0 - 1e-6)) {
        throw Error(ErrorKind::NotElliptic, "sup|g| = " + std::to_string(bound) + " is not below 1 - 1e-6");
    }
    return {std::move(g), bound};
}

/// Result of normalizing alpha d1 + beta d2 to A (d/dzbar + g d/dz).
struct NormalizedField {
    EllipticField field;
    TorusField factor;      // A, the coefficient pulled out on the left
    bool reversed = false;  // x2 -> -x2 was applied to reach |g| < 1
};

inline TorusField reverse_second_axis(const TorusField& u) {
    const int n = u.resolution();
    std::vector<cd> s(u.size());
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) s[j * n + k] = u.sample(j, (n - k) % n);
    }
    return TorusField::from_samples(u.lattice(), n, std::move(s));
}

/// Write alpha d1 + beta d2 = P dbar + Q d with P = alpha - i beta, Q = alpha + i beta.
/// When |Q| > |P| everywhere the second coordinate is reversed first. Needs a
/// rectangular source lattice so the reversal maps the grid to itself.
inline NormalizedField normalize_field(const TorusField& alpha, const TorusField& beta) {
    const Lattice& l = alpha.lattice();
    if (std::abs(l.e1.imag()) > 1e-14 || std::abs(l.e2.real()) > 1e-14) {
        throw Error(ErrorKind::InvalidModel, "field normalization needs a rectangular source lattice");
    }
    const cd i{0.0, 1.0};
    TorusField p = alpha - i * beta;
    TorusField q = alpha + i * beta;
    bool p_dominant = true, q_dominant = true;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double ap = std::abs(p.samples()[k]);
        const double aq = std::abs(q.samples()[k]);
        p_dominant = p_dominant && ap > aq;
        q_dominant = q_dominant && aq > ap;
    }
    if (!p_dominant && !q_dominant) throw Error(ErrorKind::NotElliptic, "real and imaginary parts become dependent");
    NormalizedField out;
    if (q_dominant) {
        // After x2 -> -x2 the roles of P and Q swap.
        p = reverse_second_axis(q);
        q = reverse_second_axis(alpha - i * beta);
        out.reversed = true;
    }
    out.factor = p;
    out.field = make_elliptic_field(q * reciprocal(p));
    return out;
}

struct Straightening {
    GradPeriodicFunction u;  // u = z + b zbar + periodic, with a = 1
    Lattice induced_lattice;
    double residual = 0.0;
    double jacobian_min = 0.0;
    double jacobian_max = 0.0;
    int iterations = 0;
    bool reversed = false;
    std::vector<double> history;  // residual per iteration
};

namespace detail {

// Jacobian of u as a map R^2 -> R^2: |du/dz|^2 - |du/dzbar|^2.
inline std::pair<double, double> jacobian_range(const GradPeriodicFunction& u) {
    const TorusField du = u.dx();
    const TorusField dbu = u.dxbar();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < du.size(); ++k) {
        const double j = std::norm(du.samples()[k]) - std::norm(dbu.samples()[k]);
        lo = std::min(lo, j);
        hi = std::max(hi, j);
    }
    return {lo, hi};
}

}  // namespace detail

/// Solve Z v = g for v = a_v zbar + v_per by the fixed point
/// a_v + dbar v_per = g - g d v_per, then u = z - v.
inline Straightening straighten(const EllipticField& z, double tol, int max_iters = 500) {
    if (!(z.g.sup_norm() < 1.0 - 1e-6)) throw Error(ErrorKind::NotElliptic, "sup|g| is not below 1 - 1e-6");
    const TorusField& g = z.g;
    const Lattice& l = g.lattice();
    const int n = g.resolution();

    TorusField v = TorusField::zero(l, n);
    cd av = 0.0;
    Straightening s;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iters; ++it) {
        // Nyquist modes are outside the range of dbar_apply, so they are left out of the residual.
        const TorusField rhs = band_limit(g - g * d_apply(v));
        residual = (rhs - av - dbar_apply(v)).sup_norm();
        s.history.push_back(residual);
        if (residual <= tol) break;
        av = rhs.mean();
        v = dbar_solve(without_mean(rhs));
    }
    if (residual > tol) {
        throw Error(ErrorKind::NoConvergence, "straightening residual " + format_sci(residual) + " after " +
                                                  std::to_string(max_iters) + " iterations");
    }
    s.u = GradPeriodicFunction{-v, 1.0, -av};
    s.induced_lattice = make_lattice(l.e1 - av * std::conj(l.e1), l.e2 - av * std::conj(l.e2));
    s.residual = residual;
    s.iterations = it;
    std::tie(s.jacobian_min, s.jacobian_max) = detail::jacobian_range(s.u);
    return s;
}

/// Same, starting from a general field alpha d1 + beta d2 on a rectangular torus.
inline Straightening straighten(const TorusField& alpha, const TorusField& beta, double tol, int max_iters = 500) {
    const NormalizedField nf = normalize_field(alpha, beta);
    Straightening s = straighten(nf.field, tol, max_iters);
    s.reversed = nf.reversed;
    return s;
}

/// sup over the grid of Z(u), the d/dw component of the pushed-forward field,
/// computed through real partials: Z = (1+g)/2 d1 + i(1-g)/2 d2.
inline double pushforward_check(const Straightening& s, const EllipticField& z) {
    const cd i{0.0, 1.0};
    const GradPeriodicFunction& u = s.u;
    // d1 (a z + b zbar) = a + b, d2 (a z + b zbar) = i a - i b
    const TorusField d1u = partial_1(u.periodic) + (u.a + u.b);
    const TorusField d2u = partial_2(u.periodic) + (i * u.a - i * u.b);
    const TorusField one = TorusField::constant(z.g.lattice(), z.g.resolution(), 1.0);
    const TorusField zu = 0.5 * ((one + z.g) * d1u) + (0.5 * i) * ((one - z.g) * d2u);
    return zu.sup_norm();
}

}  // namespace bsq
