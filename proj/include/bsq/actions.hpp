#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hj_solver.hpp"
#include "symbol_model.hpp"

namespace bsq {

struct ActionPair {
    cd I1 = 0.0;
    cd I2 = 0.0;
    std::array<double, 2> corrections{0.0, 0.0};
    Lattice frame;
    // Same actions evaluated as phi(e_j) - phi(0) from the stored representation.
    cd I1_path = 0.0;
    cd I2_path = 0.0;
};

/// I_j = et (a e_j + b conj(e_j)) + C_j; the periodic part does not contribute.
inline ActionPair actions(const HJSolution& sol, std::array<double, 2> corrections = {0.0, 0.0}) {
    const Lattice& l = sol.u_per.lattice();
    const double et = sol.epsilon_tilde;
    ActionPair p;
    p.frame = l;
    p.corrections = corrections;
    p.I1 = et * (sol.a * l.e1 + sol.b * std::conj(l.e1)) + corrections[0];
    p.I2 = et * (sol.a * l.e2 + sol.b * std::conj(l.e2)) + corrections[1];
    const cd phi0 = sol.phi.evaluate(0.0);
    p.I1_path = sol.phi.evaluate(l.e1) - phi0 + corrections[0];
    p.I2_path = sol.phi.evaluate(l.e2) - phi0 + corrections[1];
    return p;
}

struct RealityOptions {
    std::array<double, 2> corrections{0.0, 0.0};
    cd a_start = 0.0;
    double hj_tol = 1e-13;
    int max_newton = 50;
    bool derivative_ratio = true;
    double cauchy_radius = 0.05;
    int cauchy_samples = 16;
    HJOptions hj;
};

struct RealityResult {
    cd a_star = 0.0;
    ActionPair actions;
    int newton_iters = 0;
    cd derivative_ratio = 0.0;  // dI2/dI1 at a_star
    cd dI1_da = 0.0;
    cd dI2_da = 0.0;
    HJSolution solution;
};

namespace detail {

struct ImagActions {
    double f[2];
    HJSolution sol;
    double norm() const { return std::hypot(f[0], f[1]); }
};

inline ImagActions imag_actions(const SymbolModel& m, cd a, const RealityOptions& opt) {
    ImagActions r;
    r.sol = solve_hj(m, a, opt.hj_tol, opt.hj);
    const ActionPair p = actions(r.sol, opt.corrections);
    r.f[0] = p.I1.imag();
    r.f[1] = p.I2.imag();
    return r;
}

}  // namespace detail

/// Newton on (Im I1, Im I2) over a = (Re a, Im a) with a central finite
/// difference Jacobian (step 1e-6 et) and step halving. After reaching tol one
/// more step is taken to polish a_star.
inline RealityResult find_real_actions(const SymbolModel& m, double tol, const RealityOptions& opt = {}) {
    const double step = 1e-6 * m.epsilon_tilde;
    cd a = opt.a_start;
    detail::ImagActions cur = detail::imag_actions(m, a, opt);
    int it = 0;
    bool polished = false;
    while (true) {
        const bool done = cur.norm() <= tol;
        if (done && polished) break;
        if (it >= opt.max_newton) {
            if (done) break;
            throw Error(ErrorKind::NewtonDiverged,
                        "reality selection did not converge; |Im I| = " + format_sci(cur.norm()));
        }
        double jac[2][2];
        const cd dirs[2] = {cd(step, 0.0), cd(0.0, step)};
        for (int c = 0; c < 2; ++c) {
            const auto plus = detail::imag_actions(m, a + dirs[c], opt);
            const auto minus = detail::imag_actions(m, a - dirs[c], opt);
            for (int r = 0; r < 2; ++r) jac[r][c] = (plus.f[r] - minus.f[r]) / (2.0 * step);
        }
        const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if (std::abs(det) < 1e-12) {
            throw Error(ErrorKind::JacobianSingular, "reality Jacobian determinant " + format_sci(det));
        }
        const double dx = -(jac[1][1] * cur.f[0] - jac[0][1] * cur.f[1]) / det;
        const double dy = -(-jac[1][0] * cur.f[0] + jac[0][0] * cur.f[1]) / det;
        double lambda = 1.0;
        detail::ImagActions next = detail::imag_actions(m, a + cd(dx, dy), opt);
        for (int h = 0; h < 8 && next.norm() >= cur.norm() && next.norm() > tol; ++h) {
            lambda *= 0.5;
            next = detail::imag_actions(m, a + lambda * cd(dx, dy), opt);
        }
        ++it;
        if (done) {
            // Polishing step: keep it only if it does not make things worse.
            polished = true;
            if (next.norm() <= cur.norm()) {
                a += lambda * cd(dx, dy);
                cur = std::move(next);
            }
            continue;
        }
        a += lambda * cd(dx, dy);
        cur = std::move(next);
    }

    RealityResult res;
    res.a_star = a;
    res.newton_iters = it;
    res.actions = actions(cur.sol, opt.corrections);
    res.solution = std::move(cur.sol);
    if (opt.derivative_ratio) {
        // dI_j/da by the Cauchy integral over a circle around a_star.
        const auto pts = circle_samples(a, opt.cauchy_radius, opt.cauchy_samples);
        const auto scan = family_scan(m, pts, opt.hj_tol, 1.0, opt.hj);
        cd d1 = 0.0, d2 = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (scan[k].error) throw *scan[k].error;
            const ActionPair p = actions(*scan[k].solution, opt.corrections);
            const cd w = std::conj(pts[k] - a) / (opt.cauchy_radius * opt.cauchy_radius);
            d1 += p.I1 * w;
            d2 += p.I2 * w;
        }
        res.dI1_da = d1 / static_cast<double>(pts.size());
        res.dI2_da = d2 / static_cast<double>(pts.size());
        res.derivative_ratio = res.dI2_da / res.dI1_da;
    }
    return res;
}

using Matrix2 = std::array<std::array<double, 2>, 2>;

inline double det2(const Matrix2& j) { return j[0][0] * j[1][1] - j[0][1] * j[1][0]; }

struct ActionJacobian {
    Matrix2 jacobian{};  // d(I1, I2) / d(Re z, Im z)
    double det = 0.0;
    double richardson_defect = 0.0;
};

/// Central differences of the real actions in z, with a consistency check
/// against the doubled step.
inline ActionJacobian action_jacobian_z(const ZFamily& fam, cd z, double tol, double dz = 1e-4,
                                        const RealityOptions& base = {}) {
    RealityOptions opt = base;
    opt.derivative_ratio = false;
    opt.a_start = find_real_actions(fam.at(z), tol, opt).a_star;
    auto real_actions = [&](cd w) {
        const RealityResult r = find_real_actions(fam.at(w), tol, opt);
        return std::array<double, 2>{r.actions.I1.real(), r.actions.I2.real()};
    };
    auto jac_at = [&](double h) {
        Matrix2 j{};
        const cd dirs[2] = {cd(h, 0.0), cd(0.0, h)};
        for (int c = 0; c < 2; ++c) {
            const auto p = real_actions(z + dirs[c]);
            const auto q = real_actions(z - dirs[c]);
            for (int r = 0; r < 2; ++r) j[r][c] = (p[r] - q[r]) / (2.0 * h);
        }
        return j;
    };
    const Matrix2 j1 = jac_at(dz);
    const Matrix2 j2 = jac_at(2.0 * dz);
    double diff = 0.0, size = 0.0;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            diff = std::max(diff, std::abs(j1[r][c] - j2[r][c]));
            size = std::max(size, std::abs(j1[r][c]));
        }
    }
    ActionJacobian out;
    out.jacobian = j1;
    out.det = det2(j1);
    // absolute floor so an identically vanishing Jacobian is not flagged
    out.richardson_defect = diff / std::max(size, 1e-6);
    if (out.richardson_defect > 1e-3) {
        throw Error(ErrorKind::FDStepTooLarge, "finite-difference Jacobian changes by " +
                                                   format_sci(out.richardson_defect) + " when the step doubles");
    }
    return out;
}

/// Closed-form determinant 2i (e1 conj(e2) - conj(e1) e2) |mean(d_z p / A)|^2,
/// which equals 4 Im(conj(e1) e2) |mean|^2.
inline double jacobian_closed_form(const Lattice& l, const TorusField& dp_dz_over_A) {
    return 4.0 * l.area() * std::norm(dp_dz_over_A.mean());
}

}  // namespace bsq
