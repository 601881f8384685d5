#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "bs_lattice.hpp"
#include "chebyshev.hpp"
#include "errors.hpp"
#include "symbol_model.hpp"

namespace bsq {

enum class ActionBackend { Region, Contour };

/// H(x, xi) on a box (real part x, imaginary part xi) with closed level curves
/// around `center` for E in [E_lo, E_hi]. `action` interpolates A(E).
struct PlanarHamiltonian {
    std::function<double(double, double)> H;
    std::function<Vec2(double, double)> grad;  // optional; central differences otherwise
    double E_lo = 0.0;
    double E_hi = 1.0;
    Rect box;
    Vec2 center{0.0, 0.0};
    Chebyshev action;
    Chebyshev action_prime;
    double gradient_floor = 0.0;  // min |grad H| sampled along the level curves
    double interpolant_tail = 0.0;

    double operator()(double x, double xi) const { return H(x, xi); }
    Vec2 gradient(double x, double xi) const {
        if (grad) return grad(x, xi);
        const double d = 1e-6 * std::max(box.width(), box.height());
        return {(H(x + d, xi) - H(x - d, xi)) / (2.0 * d), (H(x, xi + d) - H(x, xi - d)) / (2.0 * d)};
    }
};

namespace detail {

inline void check_level(const PlanarHamiltonian& h, double E) {
    if (!(E >= h.E_lo && E <= h.E_hi)) throw Error(ErrorKind::OutOfRange, "energy outside the level range");
}

/// +1 when the center is a minimum (region {H <= E}), -1 for a maximum.
inline double well_sign(const PlanarHamiltonian& h, double E) {
    return h(h.center[0], h.center[1]) < E ? 1.0 : -1.0;
}

/// Distance from the center to the box edge along direction (c, s).
inline double ray_exit(const PlanarHamiltonian& h, double c, double s) {
    double t = std::numeric_limits<double>::infinity();
    if (c > 0) t = std::min(t, (h.box.re_max - h.center[0]) / c);
    if (c < 0) t = std::min(t, (h.box.re_min - h.center[0]) / c);
    if (s > 0) t = std::min(t, (h.box.im_max - h.center[1]) / s);
    if (s < 0) t = std::min(t, (h.box.im_min - h.center[1]) / s);
    return t;
}

inline double level_radius(const PlanarHamiltonian& h, double E, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const double sign = well_sign(h, E);
    auto g = [&](double rho) { return sign * (h(h.center[0] + rho * c, h.center[1] + rho * s) - E); };
    const double rmax = ray_exit(h, c, s);
    const double g0 = g(0.0), g1 = g(rmax);
    if (!(g1 > 0.0)) throw Error(ErrorKind::OpenLevelSet, "level curve leaves the computational box");
    boost::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, 0.0, rmax, g0, g1,
                                                     boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
}

/// Polar quadrature of the enclosed area; the trapezoid rule doubles until it settles.
inline double action_region(const PlanarHamiltonian& h, double E) {
    const double sign = well_sign(h, E);
    double prev = 0.0;
    std::vector<double> rho2;
    for (int n = 32; n <= (1 << 16); n *= 2) {
        // Reuse the previous half of the nodes.
        std::vector<double> next(n);
        for (int k = 0; k < n; ++k) {
            if (k % 2 == 0 && !rho2.empty()) {
                next[k] = rho2[k / 2];
            } else {
                const double r = level_radius(h, E, 2.0 * std::numbers::pi * k / n);
                next[k] = r * r;
            }
        }
        rho2 = std::move(next);
        double sum = 0.0;
        for (double v : rho2) sum += v;
        const double area = 0.5 * sum * 2.0 * std::numbers::pi / n;
        if (n > 32 && std::abs(area - prev) <= 1e-14 * std::abs(area)) return sign * area;
        prev = area;
    }
    return sign * prev;
}

inline std::pair<double, double> project_to_level(const PlanarHamiltonian& h, double E, double x, double y) {
    for (int it = 0; it < 4; ++it) {
        const double f = h(x, y) - E;
        const Vec2 g = h.gradient(x, y);
        const double g2 = g[0] * g[0] + g[1] * g[1];
        if (g2 == 0.0 || f == 0.0) break;
        x -= f * g[0] / g2;
        y -= f * g[1] / g2;
    }
    return {x, y};
}

/// Marching squares trace of the level curve around the center, with vertices
/// projected onto the curve and a Simpson (parabolic) correction per chord.
inline double action_contour(const PlanarHamiltonian& h, double E, int cells = 512) {
    const double sign = well_sign(h, E);
    const int n = cells + 1;
    const double dx = h.box.width() / cells, dy = h.box.height() / cells;
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    auto node = [&](int i, int j) { return cd(h.box.re_min + i * dx, h.box.im_min + j * dy); };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const cd p = node(i, j);
            v[i * n + j] = sign * (h(p.real(), p.imag()) - E);
            if ((i == 0 || j == 0 || i == cells || j == cells) && !(v[i * n + j] > 0.0)) {
                throw Error(ErrorKind::OpenLevelSet, "level set reaches the computational box");
            }
        }
    }
    auto val = [&](int i, int j) { return v[i * n + j]; };
    // Edge ids: horizontal edge (i,j)-(i+1,j) -> 2*(i*n+j), vertical (i,j)-(i,j+1) -> 2*(i*n+j)+1.
    std::unordered_map<long, cd> point;
    std::unordered_map<long, std::vector<long>> adj;
    auto crossing = [&](long id) {
        auto it = point.find(id);
        if (it != point.end()) return id;
        const long base = id / 2;
        const int i = static_cast<int>(base / n), j = static_cast<int>(base % n);
        const int i2 = id % 2 == 0 ? i + 1 : i, j2 = id % 2 == 0 ? j : j + 1;
        const double a = val(i, j), b = val(i2, j2);
        const double t = a / (a - b);
        point[id] = node(i, j) + t * (node(i2, j2) - node(i, j));
        return id;
    };
    auto link = [&](long a, long b) {
        adj[crossing(a)].push_back(b);
        adj[crossing(b)].push_back(a);
    };
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
            const bool s00 = val(i, j) > 0, s10 = val(i + 1, j) > 0, s01 = val(i, j + 1) > 0,
                       s11 = val(i + 1, j + 1) > 0;
            const long bottom = 2L * (i * n + j), top = 2L * (i * n + j + 1);
            const long left = 2L * (i * n + j) + 1, right = 2L * ((i + 1) * n + j) + 1;
            std::vector<long> e;
            if (s00 != s10) e.push_back(bottom);
            if (s10 != s11) e.push_back(right);
            if (s01 != s11) e.push_back(top);
            if (s00 != s01) e.push_back(left);
            if (e.size() == 2) {
                link(e[0], e[1]);
            } else if (e.size() == 4) {
                const cd mid = node(i, j) + 0.5 * cd(dx, dy);
                const bool sc = sign * (h(mid.real(), mid.imag()) - E) > 0;
                if (sc == s00) {
                    link(bottom, right);
                    link(left, top);
                } else {
                    link(left, bottom);
                    link(right, top);
                }
            }
        }
    }

    // Walk the loops and keep the largest one enclosing the center.
    std::unordered_map<long, bool> seen;
    std::vector<cd> best;
    double best_area = 0.0;
    const cd c0(h.center[0], h.center[1]);
    for (const auto& [start, nb] : adj) {
        if (seen[start]) continue;
        std::vector<cd> loop;
        long prev = -1, cur = start;
        while (!seen[cur]) {
            seen[cur] = true;
            loop.push_back(point[cur]);
            const auto& next = adj.at(cur);
            if (next.size() != 2) throw Error(ErrorKind::OpenLevelSet, "level curve is not closed");
            const long nxt = next[0] != prev ? next[0] : next[1];
            prev = cur;
            cur = nxt;
        }
        // Even-odd test for the center.
        bool inside = false;
        for (std::size_t k = 0, m = loop.size() - 1; k < loop.size(); m = k++) {
            const cd a = loop[k], b = loop[m];
            if ((a.imag() > c0.imag()) != (b.imag() > c0.imag()) &&
                c0.real() < (b.real() - a.real()) * (c0.imag() - a.imag()) / (b.imag() - a.imag()) + a.real()) {
                inside = !inside;
            }
        }
        double area = 0.0;
        for (std::size_t k = 0; k < loop.size(); ++k) {
            const cd a = loop[k], b = loop[(k + 1) % loop.size()];
            area += a.real() * b.imag() - b.real() * a.imag();
        }
        if (inside && std::abs(area) > std::abs(best_area)) {
            best_area = area;
            best = std::move(loop);
        }
    }
    if (best.empty()) throw Error(ErrorKind::OpenLevelSet, "no closed level curve around the center");

    std::vector<cd> pts;
    const double merge = 1e-9 * std::min(dx, dy);
    for (cd p : best) {
        const auto q = project_to_level(h, E, p.real(), p.imag());
        const cd pq(q.first, q.second);
        if (pts.empty() || std::abs(pq - pts.back()) > merge) pts.push_back(pq);
    }
    while (pts.size() > 1 && std::abs(pts.front() - pts.back()) <= merge) pts.pop_back();

    double area = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const cd a = pts[k], b = pts[(k + 1) % pts.size()];
        area += 0.5 * (a.real() * b.imag() - b.real() * a.imag());
        // Sagitta along the right normal of the chord, then Simpson's rule.
        const cd d = b - a;
        const double len = std::abs(d);
        const cd nr = cd(d.imag(), -d.real()) / len;
        const cd m = 0.5 * (a + b);
        double t = 0.0;
        for (int it = 0; it < 6; ++it) {
            const cd p = m + t * nr;
            const double f = h(p.real(), p.imag()) - E;
            const Vec2 g = h.gradient(p.real(), p.imag());
            const double df = g[0] * nr.real() + g[1] * nr.imag();
            if (df == 0.0 || f == 0.0) break;
            t -= f / df;
        }
        area += 2.0 / 3.0 * len * t;
    }
    return sign * std::abs(area);
}

}  // namespace detail

/// Enclosed (signed) phase-space area of the level curve H = E.
inline double action_1d(const PlanarHamiltonian& h, double E, ActionBackend backend = ActionBackend::Region) {
    detail::check_level(h, E);
    return backend == ActionBackend::Region ? detail::action_region(h, E) : detail::action_contour(h, E);
}

/// Builds the action interpolant (degree 24 by default) and checks monotonicity
/// and the absence of critical points on the sampled level curves.
inline PlanarHamiltonian make_planar_hamiltonian(std::function<double(double, double)> H,
                                                 std::function<Vec2(double, double)> grad, double E_lo, double E_hi,
                                                 const Rect& box, Vec2 center = {0.0, 0.0}, int degree = 24) {
    if (!(E_hi > E_lo) || !box.valid() || !box.contains(cd(center[0], center[1]))) {
        throw Error(ErrorKind::InvalidModel, "bad level range, box or center");
    }
    PlanarHamiltonian p;
    p.H = std::move(H);
    p.grad = std::move(grad);
    p.E_lo = E_lo;
    p.E_hi = E_hi;
    p.box = box;
    p.center = center;
    p.action = Chebyshev::fit([&](double E) { return detail::action_region(p, E); }, E_lo, E_hi, degree);
    p.action_prime = p.action.derivative();
    p.interpolant_tail = p.action.tail();

    double floor = std::numeric_limits<double>::infinity();
    for (double t : chebyshev_nodes(8)) {
        const double E = 0.5 * (E_lo + E_hi) + 0.5 * (E_hi - E_lo) * t;
        for (int k = 0; k < 64; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / 64;
            const double r = detail::level_radius(p, E, phi);
            const Vec2 g = p.gradient(center[0] + r * std::cos(phi), center[1] + r * std::sin(phi));
            floor = std::min(floor, std::hypot(g[0], g[1]));
        }
    }
    p.gradient_floor = floor;
    if (!(floor > 1e-8)) throw Error(ErrorKind::InvalidModel, "a level curve passes near a critical point");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = 0; k <= 200; ++k) {
        const double d = p.action_prime(E_lo + (E_hi - E_lo) * k / 200.0);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    if (!(lo > 0.0 || hi < 0.0)) throw Error(ErrorKind::InvalidModel, "action is not monotone on the level range");
    return p;
}

/// H = sigma + kappa sigma^2 with sigma = (x^2 + xi^2)/2 - c. A(E) = 2 pi (c + sigma(E)).
inline PlanarHamiltonian oscillator_hamiltonian(double c, double kappa, double E_lo = -0.5, double E_hi = 0.5) {
    auto sigma_of = [=](double E) {
        return kappa == 0.0 ? E : (-1.0 + std::sqrt(1.0 + 4.0 * kappa * E)) / (2.0 * kappa);
    };
    if (1.0 + 4.0 * kappa * E_lo <= 0.0 || 1.0 + 4.0 * kappa * E_hi <= 0.0 || c + sigma_of(E_lo) <= 0.0) {
        throw Error(ErrorKind::InvalidModel, "oscillator level range leaves the monotone region");
    }
    double R = 1.25 * std::sqrt(2.0 * (c + sigma_of(E_hi))) + 0.5;
    // For kappa < 0 keep the box corners inside the region where H grows with radius.
    if (kappa < 0.0) R = std::min(R, 0.999 * std::sqrt(c - 0.5 / kappa));
    return make_planar_hamiltonian(
        [=](double x, double xi) {
            const double s = 0.5 * (x * x + xi * xi) - c;
            return s + kappa * s * s;
        },
        [=](double x, double xi) {
            const double s = 0.5 * (x * x + xi * xi) - c;
            const double d = 1.0 + 2.0 * kappa * s;
            return Vec2{d * x, d * xi};
        },
        E_lo, E_hi, Rect{-R, R, -R, R});
}

/// p = p1(x1, xi1) + i p2(x2, xi2); the actions are A1(E1 + w), A2(E2 + (z - w)/i).
struct SeparableModel {
    PlanarHamiltonian p1;
    PlanarHamiltonian p2;
    Vec2 offsets{0.0, 0.0};
    double max_rho = 1.5;  // Bernstein ellipse allowed for complex energies
};

namespace detail {

inline cd complex_action(const PlanarHamiltonian& h, cd E, double max_rho, const Chebyshev& c) {
    if (E.real() < h.E_lo || E.real() > h.E_hi || h.action.ellipse_rho(E) > max_rho) {
        throw Error(ErrorKind::OutOfRange, "complex energy outside the continuation region");
    }
    return c(E);
}

}  // namespace detail

inline std::pair<cd, cd> separable_actions(const SeparableModel& m, cd z, cd w) {
    const cd e1 = m.offsets[0] + w;
    const cd e2 = m.offsets[1] + (z - w) / cd(0.0, 1.0);
    return {detail::complex_action(m.p1, e1, m.max_rho, m.p1.action),
            detail::complex_action(m.p2, e2, m.max_rho, m.p2.action)};
}

struct SeparableReal {
    cd w = 0.0;
    Vec2 I{0.0, 0.0};
    int iterations = 0;
};

/// Newton on w for Im A1 = Im A2 = 0, started from w = Re z unless a start is given.
inline SeparableReal separable_real(const SeparableModel& m, cd z, double tol = 1e-14, int max_iters = 50,
                                    std::optional<cd> start = std::nullopt) {
    const cd i(0.0, 1.0);
    cd w = start.value_or(z.real());
    SeparableReal r;
    for (int it = 0;; ++it) {
        const auto [a1, a2] = separable_actions(m, z, w);
        const double f0 = a1.imag(), f1 = a2.imag();
        const double scale = std::max({1.0, std::abs(a1), std::abs(a2)});
        if (std::hypot(f0, f1) <= tol * scale) {
            r.w = w;
            r.I = {a1.real(), a2.real()};
            r.iterations = it;
            return r;
        }
        if (it >= max_iters) throw Error(ErrorKind::NewtonDiverged, "separable reality selection did not converge");
        const cd d1 = detail::complex_action(m.p1, m.offsets[0] + w, m.max_rho, m.p1.action_prime);
        const cd d2 = i * detail::complex_action(m.p2, m.offsets[1] - i * (z - w), m.max_rho, m.p2.action_prime);
        const double j00 = d1.imag(), j01 = d1.real(), j10 = d2.imag(), j11 = d2.real();
        const double det = j00 * j11 - j01 * j10;
        if (det == 0.0) throw Error(ErrorKind::JacobianSingular, "separable reality Jacobian vanishes");
        w -= cd((j11 * f0 - j01 * f1) / det, (-j10 * f0 + j00 * f1) / det);
    }
}

/// det d(I1, I2)/d(Re z, Im z) = A1'(E1 + Re z) A2'(E2 + Im z).
inline double separable_jacobian_det(const SeparableModel& m, cd z) {
    return m.p1.action_prime(m.offsets[0] + z.real()) * m.p2.action_prime(m.offsets[1] + z.imag());
}

inline ActionMap separable_action_map(const SeparableModel& m, const Rect& domain, Vec2 theta0) {
    ActionMap map;
    map.eval = [m](cd z) { return separable_real(m, z).I; };
    map.domain = domain;
    map.theta0 = theta0;
    return map;
}

namespace detail {

/// Real x with A(offset + x) = target, x in [lo, hi].
inline double invert_action(const PlanarHamiltonian& h, double offset, double target, double lo, double hi) {
    auto g = [&](double x) { return h.action(offset + x) - target; };
    boost::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
}

/// Quantized positions along one axis: A(offset + x) = 2 pi h (theta - k), x in [lo, hi].
inline std::vector<std::pair<int, double>> quantized_axis(const PlanarHamiltonian& p, double offset, double theta,
                                                          double h, double lo, double hi) {
    if (offset + lo < p.E_lo || offset + hi > p.E_hi) {
        throw Error(ErrorKind::OutOfRange, "window maps outside the level range");
    }
    const double step = 2.0 * std::numbers::pi * h;
    const double a = p.action(offset + lo), b = p.action(offset + hi);
    const double amin = std::min(a, b), amax = std::max(a, b);
    std::vector<std::pair<int, double>> out;
    for (int k = static_cast<int>(std::floor(theta - amax / step)); k <= static_cast<int>(std::ceil(theta - amin / step));
         ++k) {
        const double target = step * (theta - k);
        if (target < amin || target > amax) continue;
        out.emplace_back(k, invert_action(p, offset, target, lo, hi));
    }
    return out;
}

}  // namespace detail

/// Closed-form lattice: Re z and Im z are quantized independently.
inline SpectralLattice separable_bs(const SeparableModel& m, double h, const Rect& window, Vec2 theta0) {
    if (!(h > 0.0)) throw Error(ErrorKind::OutOfRange, "h must be positive");
    const auto xs = detail::quantized_axis(m.p1, m.offsets[0], theta0[0], h, window.re_min, window.re_max);
    const auto ys = detail::quantized_axis(m.p2, m.offsets[1], theta0[1], h, window.im_min, window.im_max);
    SpectralLattice out;
    out.h = h;
    out.window = window;
    out.meta.source = "separable";
    out.meta.theta0 = theta0;
    out.meta.orientation = separable_jacobian_det(m, 0.5 * (window.corner(0) + window.corner(3))) > 0 ? 1 : -1;
    const double step = 2.0 * std::numbers::pi * h;
    for (const auto& [k1, x] : xs) {
        for (const auto& [k2, y] : ys) {
            LatticeEntry e;
            e.k = {k1, k2};
            e.z = cd(x, y);
            const double r1 = m.p1.action(m.offsets[0] + x) / step - (theta0[0] - k1);
            const double r2 = m.p2.action(m.offsets[1] + y) / step - (theta0[1] - k2);
            e.newton_residual = std::hypot(r1, r2);
            out.entries.push_back(e);
        }
    }
    out.meta.separation = out.entries.size() > 1 ? min_separation(out.entries) / h : 0.0;
    return out;
}

/// Torus form of the oscillator model p_j = sigma_j + kappa_j sigma_j^2: on the
/// square torus with periods 2 pi, 2 pi i, A = 2, gamma = 0, r = z/2 and
/// F = (kappa1/2) xi1^2 + i (kappa2/2) xi2^2. The actions need the corrections
/// C_j = 2 pi c_j.
struct SeparableTorusFamily {
    ZFamily family;
    std::array<double, 2> corrections{0.0, 0.0};
};

inline SeparableTorusFamily separable_torus_family(Vec2 c, Vec2 kappa, double epsilon_tilde, int n) {
    const Lattice l = make_lattice(2.0 * std::numbers::pi, cd(0.0, 2.0 * std::numbers::pi));
    std::vector<PolyTerm> terms;
    if (kappa[0] != 0.0) terms.push_back({2, 0, TorusField::constant(l, n, 0.5 * kappa[0])});
    if (kappa[1] != 0.0) terms.push_back({0, 2, TorusField::constant(l, n, cd(0.0, 0.5 * kappa[1]))});
    const Nonlinearity F = terms.empty() ? Nonlinearity{} : polynomial_nonlinearity(terms);
    SeparableTorusFamily out;
    out.corrections = {2.0 * std::numbers::pi * c[0], 2.0 * std::numbers::pi * c[1]};
    out.family.at = [=](cd z) {
        const TorusField zero = TorusField::zero(l, n);
        const double eps = std::min(0.5 * std::abs(z), epsilon_tilde * epsilon_tilde);
        return make_symbol_model(l, TorusField::constant(l, n, 2.0), zero, zero, TorusField::constant(l, n, 0.5 * z),
                                 F, eps, epsilon_tilde);
    };
    out.family.dp_dz_over_A = [=](cd) { return TorusField::constant(l, n, -0.5); };
    return out;
}

inline SeparableModel oscillator_model(Vec2 c, Vec2 kappa) {
    return {oscillator_hamiltonian(c[0], kappa[0]), oscillator_hamiltonian(c[1], kappa[1]), {0.0, 0.0}};
}

}  // namespace bsq
