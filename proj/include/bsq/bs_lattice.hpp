#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rect.hpp"
#include "winding.hpp"

namespace bsq {

using Vec2 = std::array<double, 2>;

/// z -> (I1(z), I2(z)) on a rectangle. theta1, when set, adds h theta1(z) to theta0.
struct ActionMap {
    std::function<Vec2(cd)> eval;
    Rect domain;
    Vec2 theta0{0.0, 0.0};
    std::function<Vec2(cd)> theta1;

    Vec2 operator()(cd z) const { return eval(z); }
    Vec2 theta(cd z, double h) const {
        if (!theta1) return theta0;
        const Vec2 t = theta1(z);
        return {theta0[0] + h * t[0], theta0[1] + h * t[1]};
    }
};

struct LatticeEntry {
    std::array<int, 2> k{0, 0};
    cd z = 0.0;
    int multiplicity = 1;
    double newton_residual = 0.0;
};

struct KFailure {
    std::array<int, 2> k{0, 0};
    std::string error;
};

struct LatticeMeta {
    std::string source;
    Vec2 theta0{0.0, 0.0};
    bool theta0_default = true;
    bool theta1_supplied = false;
    double tol = 0.0;
    int probe = 0;
    std::array<int, 4> k_range{0, 0, 0, 0};  // k1 min, k1 max, k2 min, k2 max
    int candidates = 0;
    int orientation = 0;        // sign of det dI/d(Re z, Im z) on the probe grid
    bool diffeomorphic = true;  // that sign is constant
    bool non_injective = false;
    double sigma_min = 0.0;  // singular values of dI/d(Re z, Im z) over the probe grid
    double sigma_max = 0.0;
    double separation = 0.0;  // min pairwise |z_i - z_j| / h
    bool certified = false;
    std::vector<KFailure> failures;
};

struct SpectralLattice {
    std::vector<LatticeEntry> entries;
    double h = 0.0;
    Rect window;
    LatticeMeta meta;
};

struct BSOptions {
    double tol = 1e-10;
    int probe = 16;
    int max_newton = 50;
    bool certify = false;
    bool theta0_default = true;
    unsigned threads = 0;
};

inline double min_separation(const std::vector<LatticeEntry>& e) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e.size(); ++i) {
        for (std::size_t j = i + 1; j < e.size(); ++j) d = std::min(d, std::abs(e[i].z - e[j].z));
    }
    return d;
}

namespace detail {

inline Vec2 sub(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }

inline double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

/// Central difference Jacobian d(I1, I2)/d(Re z, Im z).
inline std::array<Vec2, 2> map_jacobian(const ActionMap& map, cd z, double step) {
    const Vec2 px = map(z + step), mx = map(z - step);
    const Vec2 py = map(z + cd(0.0, step)), my = map(z - cd(0.0, step));
    return {{{(px[0] - mx[0]) / (2.0 * step), (py[0] - my[0]) / (2.0 * step)},
             {(px[1] - mx[1]) / (2.0 * step), (py[1] - my[1]) / (2.0 * step)}}};
}

inline Vec2 singular_values(const std::array<Vec2, 2>& j) {
    const double a = j[0][0], b = j[0][1], c = j[1][0], d = j[1][1];
    const double s1 = std::hypot(a + d, c - b), s2 = std::hypot(a - d, c + b);
    return {0.5 * std::abs(s1 - s2), 0.5 * (s1 + s2)};
}

struct Probe {
    int n = 0;
    std::vector<cd> z;
    std::vector<Vec2> I;
    const Vec2& at(int i, int j) const { return I[i * n + j]; }
    cd node(int i, int j) const { return z[i * n + j]; }
};

inline Probe make_probe(const ActionMap& map, const Rect& w, int n, unsigned threads) {
    Probe p;
    p.n = n;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            p.z.emplace_back(w.re_min + w.width() * i / (n - 1), w.im_min + w.height() * j / (n - 1));
        }
    }
    p.I.resize(p.z.size());
    parallel_for(p.z.size(), [&](std::size_t i) { p.I[i] = map(p.z[i]); }, threads);
    return p;
}

/// Inverse of the bilinear interpolant of the probe grid. Returns nullopt if
/// no cell contains the target.
inline std::optional<cd> probe_inverse(const Probe& p, const Vec2& target) {
    for (int i = 0; i + 1 < p.n; ++i) {
        for (int j = 0; j + 1 < p.n; ++j) {
            const Vec2 &f00 = p.at(i, j), &f10 = p.at(i + 1, j), &f01 = p.at(i, j + 1), &f11 = p.at(i + 1, j + 1);
            double lo0 = std::min({f00[0], f10[0], f01[0], f11[0]}), hi0 = std::max({f00[0], f10[0], f01[0], f11[0]});
            double lo1 = std::min({f00[1], f10[1], f01[1], f11[1]}), hi1 = std::max({f00[1], f10[1], f01[1], f11[1]});
            const double pad0 = 1e-9 * (hi0 - lo0 + 1e-300), pad1 = 1e-9 * (hi1 - lo1 + 1e-300);
            if (target[0] < lo0 - pad0 || target[0] > hi0 + pad0 || target[1] < lo1 - pad1 || target[1] > hi1 + pad1) {
                continue;
            }
            double s = 0.5, t = 0.5;
            for (int it = 0; it < 30; ++it) {
                Vec2 f, ds, dt;
                for (int c = 0; c < 2; ++c) {
                    f[c] = (1 - s) * (1 - t) * f00[c] + s * (1 - t) * f10[c] + (1 - s) * t * f01[c] + s * t * f11[c] -
                           target[c];
                    ds[c] = (1 - t) * (f10[c] - f00[c]) + t * (f11[c] - f01[c]);
                    dt[c] = (1 - s) * (f01[c] - f00[c]) + s * (f11[c] - f10[c]);
                }
                const double det = ds[0] * dt[1] - ds[1] * dt[0];
                if (det == 0.0) break;
                s -= (dt[1] * f[0] - dt[0] * f[1]) / det;
                t -= (-ds[1] * f[0] + ds[0] * f[1]) / det;
            }
            if (s >= -1e-6 && s <= 1 + 1e-6 && t >= -1e-6 && t <= 1 + 1e-6) {
                const cd z0 = p.node(i, j), z1 = p.node(i + 1, j + 1);
                return cd(z0.real() + s * (z1.real() - z0.real()), z0.imag() + t * (z1.imag() - z0.imag()));
            }
        }
    }
    return std::nullopt;
}

inline Vec2 bs_target(const ActionMap& map, cd z, double h, std::array<int, 2> k) {
    const Vec2 th = map.theta(z, h);
    return {2.0 * std::numbers::pi * h * (th[0] - k[0]), 2.0 * std::numbers::pi * h * (th[1] - k[1])};
}

/// |I(z)/(2 pi h) - (theta(z) - k)|.
inline double bs_residual(const ActionMap& map, cd z, double h, std::array<int, 2> k) {
    return norm(sub(map(z), bs_target(map, z, h, k))) / (2.0 * std::numbers::pi * h);
}

inline LatticeEntry bs_newton(const ActionMap& map, cd z, double h, std::array<int, 2> k, double tol, int max_iters,
                              double fd_step) {
    double res = bs_residual(map, z, h, k);
    bool polished = false;
    for (int it = 0;; ++it) {
        if (res <= tol && polished) break;
        if (it >= max_iters) {
            if (res <= tol) break;
            throw Error(ErrorKind::NewtonDiverged, "residual " + format_sci(res) + " after " +
                                                       std::to_string(max_iters) + " iterations");
        }
        const auto j = map_jacobian(map, z, fd_step);
        const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        const Vec2 f = sub(map(z), bs_target(map, z, h, k));
        if (!(std::abs(det) > 0.0)) throw Error(ErrorKind::NewtonDiverged, "singular action Jacobian");
        const cd dz(-(j[1][1] * f[0] - j[0][1] * f[1]) / det, -(-j[1][0] * f[0] + j[0][0] * f[1]) / det);
        double lambda = 1.0, next = bs_residual(map, z + dz, h, k);
        for (int half = 0; half < 10 && next > res && next > tol; ++half) {
            lambda *= 0.5;
            next = bs_residual(map, z + lambda * dz, h, k);
        }
        if (res <= tol) {
            polished = true;
            if (next > res) continue;
        }
        z += lambda * dz;
        res = next;
        if (!std::isfinite(res)) throw Error(ErrorKind::NewtonDiverged, "non-finite residual");
    }
    LatticeEntry e;
    e.k = k;
    e.z = z;
    e.newton_residual = res;
    return e;
}

}  // namespace detail

/// Multiplicity of an entry as the winding of w -> I(w)/(2 pi h) + k - theta(w)
/// around a circle of the given radius, with I1 + i I2 conjugated when the
/// map reverses orientation (orientation = 0: decided from det dI on the circle).
inline int certify_multiplicity(const ActionMap& map, const LatticeEntry& entry, double h, double radius,
                                int orientation = 0, int samples = 32) {
    if (orientation == 0) {
        double s = 0.0;
        for (int q = 0; q < 4; ++q) {
            const auto j = detail::map_jacobian(map, entry.z + std::polar(radius, q * std::numbers::pi / 2), 1e-3 * radius);
            s += j[0][0] * j[1][1] - j[0][1] * j[1][0];
        }
        orientation = s < 0.0 ? -1 : 1;
    }
    auto f = [&](cd w) {
        const Vec2 I = map(w);
        const Vec2 th = map.theta(w, h);
        const cd v = cd(I[0], I[1]) / (2.0 * std::numbers::pi * h) + cd(entry.k[0], entry.k[1]) - cd(th[0], th[1]);
        return orientation < 0 ? std::conj(v) : v;
    };
    return winding_multiplicity(f, entry.z, radius, samples);
}

/// Solves I(z) = 2 pi h (theta(z) - k) for all k whose solution lies in the window.
/// Candidate k come from the probe image padded by two lattice steps; each is
/// solved by Newton from the bilinear inverse of the probe grid. Per-k failures
/// are recorded in the metadata.
inline SpectralLattice bs_solve(const ActionMap& map, double h, const Rect& window, const BSOptions& opt = {}) {
    if (!(h > 0.0)) throw Error(ErrorKind::OutOfRange, "h must be positive");
    if (!window.valid() || !map.domain.contains(window)) {
        throw Error(ErrorKind::OutOfRange, "window must be a rectangle inside the action map domain");
    }
    const double step = 2.0 * std::numbers::pi * h;
    SpectralLattice out;
    out.h = h;
    out.window = window;
    LatticeMeta& meta = out.meta;
    meta.source = "bs_solve";
    meta.theta0 = map.theta0;
    meta.theta0_default = opt.theta0_default;
    meta.theta1_supplied = static_cast<bool>(map.theta1);
    meta.tol = opt.tol;
    meta.probe = opt.probe;

    const detail::Probe probe = detail::make_probe(map, window, opt.probe, opt.threads);
    Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const Vec2& v : probe.I) {
        for (int c = 0; c < 2; ++c) {
            lo[c] = std::min(lo[c], v[c]);
            hi[c] = std::max(hi[c], v[c]);
        }
    }
    // Cell Jacobians: orientation and singular values.
    int pos = 0, neg = 0;
    meta.sigma_min = std::numeric_limits<double>::infinity();
    const double dx = window.width() / (opt.probe - 1), dy = window.height() / (opt.probe - 1);
    for (int i = 0; i + 1 < opt.probe; ++i) {
        for (int j = 0; j + 1 < opt.probe; ++j) {
            const Vec2 &f00 = probe.at(i, j), &f10 = probe.at(i + 1, j), &f01 = probe.at(i, j + 1),
                       &f11 = probe.at(i + 1, j + 1);
            std::array<Vec2, 2> jac;
            for (int c = 0; c < 2; ++c) {
                jac[c][0] = 0.5 * (f10[c] - f00[c] + f11[c] - f01[c]) / dx;
                jac[c][1] = 0.5 * (f01[c] - f00[c] + f11[c] - f10[c]) / dy;
            }
            const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            (det > 0.0 ? pos : neg)++;
            const Vec2 sv = detail::singular_values(jac);
            meta.sigma_min = std::min(meta.sigma_min, sv[0]);
            meta.sigma_max = std::max(meta.sigma_max, sv[1]);
        }
    }
    meta.orientation = pos >= neg ? 1 : -1;
    meta.diffeomorphic = pos == 0 || neg == 0;

    // I/(2 pi h) = theta - k  =>  k = theta - I/(2 pi h).
    const Vec2 th = map.theta0;
    meta.k_range = {static_cast<int>(std::floor(th[0] - hi[0] / step)) - 2,
                    static_cast<int>(std::ceil(th[0] - lo[0] / step)) + 2,
                    static_cast<int>(std::floor(th[1] - hi[1] / step)) - 2,
                    static_cast<int>(std::ceil(th[1] - lo[1] / step)) + 2};
    std::vector<std::array<int, 2>> ks;
    for (int k1 = meta.k_range[0]; k1 <= meta.k_range[1]; ++k1) {
        for (int k2 = meta.k_range[2]; k2 <= meta.k_range[3]; ++k2) ks.push_back({k1, k2});
    }
    meta.candidates = static_cast<int>(ks.size());

    const double scale = std::max(window.width(), window.height());
    const double fd_step = 1e-6 * scale;
    std::vector<std::optional<LatticeEntry>> found(ks.size());
    std::vector<std::string> errors(ks.size());
    parallel_for(
        ks.size(),
        [&](std::size_t i) {
            const Vec2 target = detail::bs_target(map, window.corner(0), h, ks[i]);
            const std::optional<cd> start = detail::probe_inverse(probe, target);
            if (!start) return;  // solution (if any) is outside the window
            try {
                LatticeEntry e = detail::bs_newton(map, *start, h, ks[i], opt.tol, opt.max_newton, fd_step);
                if (window.contains(e.z)) found[i] = e;
            } catch (const Error& err) {
                errors[i] = err.what();
            }
        },
        opt.threads);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (found[i]) out.entries.push_back(*found[i]);
        if (!errors[i].empty()) meta.failures.push_back({ks[i], errors[i]});
    }

    const double same = 1e-6 * h;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        for (std::size_t j = i + 1; j < out.entries.size(); ++j) {
            if (std::abs(out.entries[i].z - out.entries[j].z) <= same) meta.non_injective = true;
        }
    }
    meta.separation = out.entries.size() > 1 ? min_separation(out.entries) / h : 0.0;

    if (opt.certify && !out.entries.empty()) {
        std::vector<double> radius(out.entries.size());
        const double lone = 0.25 * step / std::max(meta.sigma_max, 1e-300);
        for (std::size_t i = 0; i < out.entries.size(); ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < out.entries.size(); ++j) {
                if (j != i) d = std::min(d, std::abs(out.entries[i].z - out.entries[j].z));
            }
            radius[i] = std::isfinite(d) ? 0.4 * d : lone;
        }
        std::vector<std::string> cert_errors(out.entries.size());
        parallel_for(
            out.entries.size(),
            [&](std::size_t i) {
                try {
                    out.entries[i].multiplicity =
                        certify_multiplicity(map, out.entries[i], h, radius[i], meta.orientation);
                } catch (const Error& err) {
                    out.entries[i].multiplicity = 0;
                    cert_errors[i] = err.what();
                }
            },
            opt.threads);
        for (std::size_t i = 0; i < out.entries.size(); ++i) {
            if (!cert_errors[i].empty()) meta.failures.push_back({out.entries[i].k, cert_errors[i]});
        }
        meta.certified = true;
    }
    return out;
}

/// Leading-order saddle point resonances z = E0 + h (l1 (k1 + 1/2) - i l2 (k2 + 1/2)),
/// k in N^2, inside the window.
inline cd saddle_point(double lambda1, double lambda2, double E0, double h, std::array<int, 2> k) {
    return E0 + h * cd(lambda1 * (k[0] + 0.5), -lambda2 * (k[1] + 0.5));
}

inline SpectralLattice saddle_resonances(double lambda1, double lambda2, double E0, double h, const Rect& window,
                                         int max_index = 100000) {
    if (!(lambda1 > 0.0 && lambda2 > 0.0 && h > 0.0)) {
        throw Error(ErrorKind::OutOfRange, "saddle preset needs lambda1, lambda2, h > 0");
    }
    SpectralLattice out;
    out.h = h;
    out.window = window;
    out.meta.source = "saddle";
    out.meta.theta0 = {-0.5, 0.5};
    out.meta.orientation = 1;
    for (int k1 = 0; k1 <= max_index; ++k1) {
        if (saddle_point(lambda1, lambda2, E0, h, {k1, 0}).real() > window.re_max) break;
        for (int k2 = 0; k2 <= max_index; ++k2) {
            const cd z = saddle_point(lambda1, lambda2, E0, h, {k1, k2});
            if (z.imag() < window.im_min) break;
            if (window.contains(z)) out.entries.push_back({{k1, k2}, z, 1, 0.0});
        }
    }
    out.meta.separation = out.entries.size() > 1 ? min_separation(out.entries) / h : 0.0;
    return out;
}

}  // namespace bsq
