#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "torus_field.hpp"

namespace bsq {

/// coeff(x) * xi1^p1 * xi2^p2
struct PolyTerm {
    int p1 = 0;
    int p2 = 0;
    TorusField coeff;
};

/// F(x, xi) evaluated pointwise on the grid. Must vanish to second order in xi.
struct Nonlinearity {
    std::function<TorusField(const TorusField& xi1, const TorusField& xi2)> eval;
    std::vector<PolyTerm> terms;  // empty when F is an opaque callable

    bool empty() const { return !eval; }
    TorusField operator()(const TorusField& xi1, const TorusField& xi2) const { return eval(xi1, xi2); }
};

inline cd ipow(cd x, int p) {
    cd r = 1.0;
    for (; p > 0; p >>= 1, x *= x) {
        if (p & 1) r *= x;
    }
    return r;
}

inline Nonlinearity polynomial_nonlinearity(std::vector<PolyTerm> terms) {
    for (const PolyTerm& t : terms) {
        if (t.p1 < 0 || t.p2 < 0 || t.p1 + t.p2 < 2) {
            throw Error(ErrorKind::InvalidModel, "nonlinearity terms must have total degree at least 2");
        }
    }
    Nonlinearity f;
    f.terms = terms;
    f.eval = [terms = std::move(terms)](const TorusField& xi1, const TorusField& xi2) {
        std::vector<cd> out(xi1.size());
        for (const PolyTerm& t : terms) {
            for (std::size_t k = 0; k < out.size(); ++k) {
                out[k] += t.coeff.samples()[k] * ipow(xi1.samples()[k], t.p1) * ipow(xi2.samples()[k], t.p2);
            }
        }
        return TorusField::from_samples(xi1.lattice(), xi1.resolution(), std::move(out));
    };
    return f;
}

/// Normalized eikonal model: p(x, xi) = A(x) [ (xi1 + i xi2)/2 + F(x, xi - gamma) - r(x) ],
/// xi the gradient in real coordinates. F and r are already divided by A.
struct SymbolModel {
    Lattice lattice;
    TorusField A;
    TorusField gamma1;
    TorusField gamma2;
    TorusField r;
    Nonlinearity F;
    double epsilon = 0.0;
    double epsilon_tilde = 0.1;
    double F_constant = 0.0;  // sup|F(xi)| / s^2 estimate on test fields of size s

    int resolution() const { return A.resolution(); }
};

inline double default_epsilon_tilde(double epsilon) { return std::sqrt(epsilon); }

namespace detail {

inline double second_order_constant(const Nonlinearity& f, const Lattice& l, int n) {
    if (f.empty()) return 0.0;
    double c[2];
    const double sizes[2] = {1e-2, 1e-3};
    for (int k = 0; k < 2; ++k) {
        const TorusField x1 = TorusField::constant(l, n, sizes[k]);
        const TorusField x2 = TorusField::constant(l, n, cd(0.0, 0.5 * sizes[k]));
        c[k] = f(x1, x2).sup_norm() / (sizes[k] * sizes[k]);
    }
    // A linear or constant term makes the ratio blow up as s shrinks.
    if (c[1] > 2.0 * c[0] + 1e-12) {
        throw Error(ErrorKind::InvalidModel, "nonlinearity does not vanish to second order");
    }
    return std::max(c[0], c[1]);
}

}  // namespace detail

/// Validates and builds a model. Requires min|A| > 0, 0 < eps_tilde < 1 and
/// eps <= eps_tilde^2.
inline SymbolModel make_symbol_model(const Lattice& lattice, TorusField A, TorusField gamma1, TorusField gamma2,
                                     TorusField r, Nonlinearity F, double epsilon, double epsilon_tilde) {
    for (const TorusField* f : {&A, &gamma1, &gamma2, &r}) {
        if (!f->compatible(A) || f->shift() != 0.0) {
            throw Error(ErrorKind::InvalidModel, "model fields must be periodic on a common grid");
        }
    }
    if (std::abs(lattice.e1 - A.lattice().e1) > 0.0 || std::abs(lattice.e2 - A.lattice().e2) > 0.0) {
        throw Error(ErrorKind::InvalidModel, "model lattice differs from field lattice");
    }
    double amin = std::numeric_limits<double>::infinity();
    for (const cd& v : A.samples()) amin = std::min(amin, std::abs(v));
    if (!(amin > 0.0)) throw Error(ErrorKind::InvalidModel, "A vanishes on the grid");
    if (!(epsilon_tilde > 0.0 && epsilon_tilde < 1.0)) {
        throw Error(ErrorKind::InvalidModel, "epsilon_tilde must lie in (0, 1)");
    }
    if (epsilon < 0.0 || epsilon > epsilon_tilde * epsilon_tilde * (1.0 + 1e-12)) {
        throw Error(ErrorKind::InvalidModel, "need 0 <= epsilon <= epsilon_tilde^2");
    }
    SymbolModel m;
    m.lattice = lattice;
    m.F_constant = detail::second_order_constant(F, lattice, A.resolution());
    m.A = std::move(A);
    m.gamma1 = std::move(gamma1);
    m.gamma2 = std::move(gamma2);
    m.r = std::move(r);
    m.F = std::move(F);
    m.epsilon = epsilon;
    m.epsilon_tilde = epsilon_tilde;
    return m;
}

/// Model with A = 1 and gamma = 0.
inline SymbolModel simple_model(const Lattice& lattice, int n, TorusField r, Nonlinearity F, double epsilon,
                                double epsilon_tilde) {
    const TorusField zero = TorusField::zero(lattice, n);
    return make_symbol_model(lattice, TorusField::constant(lattice, n, 1.0), zero, zero, std::move(r), std::move(F),
                             epsilon, epsilon_tilde);
}

/// Holomorphic family z -> model. dp_dz_over_A(z) returns d_z p / A on the
/// grid (for F independent of z this is -d_z r).
struct ZFamily {
    std::function<SymbolModel(cd)> at;
    std::function<TorusField(cd)> dp_dz_over_A;
};

/// Linear first-order family p = A (d/dxbar) + q0 + z r, written in normalized
/// form: F = 0, forcing r~(z) = -(q0 + z r) / A.
inline ZFamily linear_z_family(const Lattice& lattice, const TorusField& A, const TorusField& q0, const TorusField& r,
                               double epsilon_tilde) {
    const TorusField B = reciprocal(A);
    const TorusField bq0 = B * q0;
    const TorusField br = B * r;
    ZFamily fam;
    fam.at = [=](cd z) {
        const TorusField zero = TorusField::zero(lattice, A.resolution());
        TorusField forcing = -(bq0 + z * br);
        // With F = 0 the iteration is exact after one step, so the regime bound is moot.
        const double eps = std::min(forcing.sup_norm(), epsilon_tilde * epsilon_tilde);
        return make_symbol_model(lattice, A, zero, zero, std::move(forcing), Nonlinearity{}, eps, epsilon_tilde);
    };
    fam.dp_dz_over_A = [=](cd) { return br; };
    return fam;
}

}  // namespace bsq
