#pragma once

#include <cfloat>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "symbol_model.hpp"
#include "torus_field.hpp"

namespace bsq {

struct HJOptions {
    int max_iters = 200;
    double m_weight = 2.5;
    // Starting point of the iteration (defaults to zero).
    std::optional<TorusField> initial_u;
    cd initial_b = 0.0;
};

struct HJSolution {
    cd a = 0.0;
    cd b = 0.0;
    TorusField u_per;
    GradPeriodicFunction phi;  // eps_tilde (u_per + a x + b xbar)
    double epsilon_tilde = 0.0;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> contraction_history;
    double roundoff_floor = 0.0;
    double size_constant = 0.0;  // (|u_per'|_m + |b|) / (eps_tilde + eps/eps_tilde)
};

namespace detail {

// Gradient of eps_tilde (u_per + a x + b xbar) in real coordinates, minus gamma.
inline std::pair<TorusField, TorusField> shifted_gradient(const SymbolModel& m, const TorusField& u, cd a, cd b) {
    const cd i{0.0, 1.0};
    const double et = m.epsilon_tilde;
    TorusField xi1 = et * (partial_1(u) + (a + b)) - m.gamma1;
    TorusField xi2 = et * (partial_2(u) + (i * a - i * b)) - m.gamma2;
    return {std::move(xi1), std::move(xi2)};
}

inline TorusField eval_F(const SymbolModel& m, const TorusField& xi1, const TorusField& xi2) {
    if (m.F.empty()) return TorusField::zero(m.lattice, m.resolution());
    return m.F(xi1, xi2);
}

}  // namespace detail

/// sup over the grid of |p(x, phi'(x))| through the un-normalized symbol.
inline double eikonal_residual(const SymbolModel& m, const TorusField& u, cd a, cd b) {
    const cd i{0.0, 1.0};
    const double et = m.epsilon_tilde;
    const TorusField p1 = et * (partial_1(u) + (a + b));
    const TorusField p2 = et * (partial_2(u) + (i * a - i * b));
    const TorusField fx = detail::eval_F(m, p1 - m.gamma1, p2 - m.gamma2);
    const TorusField p = m.A * (0.5 * (p1 + i * p2) + fx - m.r);
    return p.sup_norm();
}

/// Contraction iteration for dbar u + b = r/et - F(phi' - gamma)/et with
/// phi = et (u + a x + b xbar): b is the mean of the right-hand side, u the
/// zero-mean dbar solve of the rest. Stops when the weighted-norm increment of
/// (d u, dbar u) plus |db| drops below tol, or stagnates under the a-priori
/// round-off bound.
inline HJSolution solve_hj(const SymbolModel& m, cd a, double tol, const HJOptions& opt = {}) {
    if (!(std::abs(a) < 1.0)) throw Error(ErrorKind::OutOfRange, "family parameter must satisfy |a| < 1");
    const Lattice& l = m.lattice;
    const int n = m.resolution();
    const double et = m.epsilon_tilde;
    const TorusField forcing = (1.0 / et) * m.r;

    TorusField u = opt.initial_u ? without_mean(*opt.initial_u) : TorusField::zero(l, n);
    cd b = opt.initial_b;

    // Increment weights: |d du|_m + |dbar du|_m = sum (1+|k|)^m |k| |du(k)|.
    // weight_sum bounds the amplification of per-coefficient round-off.
    std::vector<double> inc_weight(static_cast<std::size_t>(n) * n);
    double weight_sum = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            if (u.nyquist_at(j, k)) continue;
            const double kap = std::abs(u.frequency_at(j, k));
            inc_weight[j * n + k] = std::pow(1.0 + kap, opt.m_weight) * kap;
            if (3 * std::abs(centered_index(j, n)) < n && 3 * std::abs(centered_index(k, n)) < n) {
                weight_sum += std::pow(1.0 + kap, opt.m_weight + 1.0);
            }
        }
    }

    HJSolution s;
    s.a = a;
    s.epsilon_tilde = et;
    int slow_steps = 0;
    bool converged = false;
    int it = 0;
    double floor = 0.0;
    for (; it < opt.max_iters; ++it) {
        const auto [xi1, xi2] = detail::shifted_gradient(m, u, a, b);
        const TorusField nl = dealias(detail::eval_F(m, xi1, xi2));
        const TorusField rhs = forcing - (1.0 / et) * nl;
        const cd b_new = rhs.mean();
        const TorusField u_new = dbar_solve(without_mean(rhs));
        double inc = std::abs(b_new - b);
        for (std::size_t k = 0; k < inc_weight.size(); ++k) {
            inc += inc_weight[k] * std::abs(u_new.coeffs()[k] - u.coeffs()[k]);
        }
        floor = 16.0 * DBL_EPSILON * weight_sum * std::max(1.0, rhs.coeff_sup_norm());
        const double prev = s.contraction_history.empty() ? 0.0 : s.contraction_history.back();
        s.contraction_history.push_back(inc);
        u = u_new;
        b = b_new;
        // Below the a-priori round-off bound, stop as soon as the increments stop halving.
        const bool stagnant = inc <= floor && prev > 0.0 && inc > 0.5 * prev;
        if (inc <= tol || stagnant) {
            converged = true;
            ++it;
            break;
        }
        if (s.contraction_history.size() >= 2 && prev > 10.0 * floor) {
            slow_steps = inc > 0.9 * prev ? slow_steps + 1 : 0;
            if (slow_steps >= 5) {
                throw Error(ErrorKind::NoContraction,
                            "increments stalled at " + format_sci(inc) + "; epsilon_tilde too large for this model");
            }
        }
    }
    if (!converged) {
        throw Error(ErrorKind::MaxIterations, "no convergence in " + std::to_string(opt.max_iters) + " iterations");
    }
    s.b = b;
    s.u_per = u;
    s.phi = GradPeriodicFunction{et * u, et * a, et * b};
    s.iterations = it;
    s.roundoff_floor = floor;
    s.residual = eikonal_residual(m, u, a, b);
    const double scale = et + m.epsilon / et;
    const double size = weighted_norm(d_apply(u), opt.m_weight) + weighted_norm(dbar_apply(u), opt.m_weight) + std::abs(b);
    s.size_constant = scale > 0.0 ? size / scale : 0.0;
    return s;
}

/// Observed contraction ratios inc[k+1]/inc[k], skipping the first step and
/// increments below min_increment (round-off territory).
inline std::vector<double> contraction_ratios(const HJSolution& s, double min_increment = 1e-9) {
    std::vector<double> out;
    const auto& h = s.contraction_history;
    for (std::size_t k = 1; k + 1 < h.size(); ++k) {
        if (h[k + 1] > min_increment) out.push_back(h[k + 1] / h[k]);
    }
    return out;
}

struct ScanEntry {
    cd a = 0.0;
    std::optional<HJSolution> solution;
    std::optional<Error> error;
};

/// Solves at every sample; per-sample failures are recorded, not thrown.
inline std::vector<ScanEntry> family_scan(const SymbolModel& m, const std::vector<cd>& a_samples, double tol,
                                          double bound_c = 2.0, const HJOptions& opt = {}) {
    std::vector<ScanEntry> out(a_samples.size());
    parallel_for(a_samples.size(), [&](std::size_t k) {
        out[k].a = a_samples[k];
        try {
            if (!(std::abs(a_samples[k]) < 1.0 / bound_c)) {
                throw Error(ErrorKind::OutOfRange, "|a| must stay below 1/C");
            }
            out[k].solution = solve_hj(m, a_samples[k], tol, opt);
        } catch (const Error& e) {
            out[k].error = e;
        }
    });
    return out;
}

/// Equally spaced points a0 + rho exp(2 pi i k / count).
inline std::vector<cd> circle_samples(cd a0, double rho, int count) {
    std::vector<cd> out(count);
    for (int k = 0; k < count; ++k) out[k] = a0 + std::polar(rho, 2.0 * std::numbers::pi * k / count);
    return out;
}

/// Magnitude of the first negative Fourier mode of the circle samples of
/// a -> b(a) and a -> u_per coefficient at (m, n); zero for holomorphic data.
inline double holomorphy_defect(const std::vector<HJSolution>& sols, cd a0, int m = 1, int n = 0) {
    if (sols.size() < 16) throw Error(ErrorKind::InsufficientSamples, "need at least 16 samples on the circle");
    cd cb = 0.0, cu = 0.0;
    for (const HJSolution& s : sols) {
        const cd w = std::exp(cd(0.0, std::arg(s.a - a0)));
        cb += s.b * w;
        cu += s.u_per.coeff(m, n) * w;
    }
    const double k = static_cast<double>(sols.size());
    return std::max(std::abs(cb) / k, std::abs(cu) / k);
}

}  // namespace bsq
