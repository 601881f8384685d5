#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <lapacke.h>

#include "errors.hpp"
#include "rect.hpp"
#include "torus_field.hpp"

namespace bsq {

/// P = A(x) d/dxbar + q0(x) + z r(x) acting on theta-Floquet functions.
struct FirstOrderOperator {
    Lattice lattice;
    TorusField A;
    TorusField q0;
    TorusField r;
    TorusField B;  // 1/A

    TorusField q(cd z) const { return q0 + z * r; }
    TorusField Bq(cd z) const { return B * q(z); }
};

inline FirstOrderOperator make_first_order_operator(TorusField A, TorusField q0, TorusField r) {
    if (!A.compatible(q0) || !A.compatible(r)) throw Error(ErrorKind::InvalidModel, "operator fields on different grids");
    for (const cd& v : A.samples()) {
        if (!(std::abs(v) > 0.0)) throw Error(ErrorKind::InvalidModel, "A vanishes on the grid");
    }
    FirstOrderOperator op;
    op.lattice = A.lattice();
    op.B = reciprocal(A);
    const TorusField check = op.B * A;
    for (const cd& v : check.samples()) {
        if (std::abs(v - 1.0) > 1e-12) throw Error(ErrorKind::InvalidModel, "A is too close to vanishing");
    }
    op.A = std::move(A);
    op.q0 = std::move(q0);
    op.r = std::move(r);
    return op;
}

/// theta0(z) = (2/i) mean(B q(z)).
inline cd floquet_theta0(const FirstOrderOperator& op, cd z) { return cd(0.0, -2.0) * op.Bq(z).mean(); }
/// (2/i) mean(B r): the rate at which theta0 moves with z.
inline cd floquet_coupling(const FirstOrderOperator& op) { return cd(0.0, -2.0) * (op.B * op.r).mean(); }

/// Zero-mean periodic phi with dbar phi + B q - mean(B q) = 0.
inline TorusField conjugating_phase(const FirstOrderOperator& op, cd z) {
    return -dbar_solve(without_mean(op.Bq(z)));
}

/// P u on theta-Floquet fields, derivative taken spectrally.
inline TorusField apply_operator(const FirstOrderOperator& op, cd z, const TorusField& u) {
    return op.A * dbar_apply(u) + op.q(z) * u;
}

struct Invertibility {
    bool invertible = true;
    double distance = 0.0;  // dist((2/i) mean(Bq) - theta, dual lattice)
    std::optional<TorusField> kernel;
};

/// Invertible unless (2/i) mean(Bq) - theta lies on the dual lattice; then the
/// kernel is spanned by exp(conj(c) x - c xbar + phi), c = mean(Bq).
inline Invertibility invertibility(const FirstOrderOperator& op, cd z, cd theta) {
    const TorusField bq = op.Bq(z);
    const cd c = bq.mean();
    Invertibility out;
    out.distance = dual_distance(op.lattice, cd(0.0, -2.0) * c - theta);
    out.invertible = out.distance > 1e-10;
    if (out.invertible) return out;
    const TorusField phi = -dbar_solve(without_mean(bq));
    const int n = bq.resolution();
    std::vector<cd> s(bq.size());
    double norm2 = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            const cd x = bq.point(j, k);
            s[j * n + k] = std::exp(std::conj(c) * x - c * std::conj(x) + phi.sample(j, k));
            norm2 += std::norm(s[j * n + k]);
        }
    }
    const double scale = 1.0 / std::sqrt(norm2 / static_cast<double>(s.size()));
    for (cd& v : s) v *= scale;
    out.kernel = TorusField::from_samples(op.lattice, n, std::move(s), theta);
    return out;
}

struct FloquetSpectrumReport {
    cd theta0 = 0.0;
    cd coupling = 0.0;
    std::vector<cd> lattice_points;
    std::vector<std::pair<int, int>> labels;  // dual-lattice index of each point
    bool nondegenerate = false;
};

/// All z in the window with theta0(0) + z coupling in theta + dual lattice.
inline FloquetSpectrumReport spectrum_lattice(const FirstOrderOperator& op, cd theta, const Rect& window) {
    FloquetSpectrumReport rep;
    rep.theta0 = floquet_theta0(op, 0.0);
    rep.coupling = floquet_coupling(op);
    rep.nondegenerate = std::abs(rep.coupling) > 1e-14;
    if (!rep.nondegenerate) return rep;
    const Lattice& l = op.lattice;
    // l = coupling z + theta0 - theta; bound its dual coordinates over the window corners.
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (int k = 0; k < 4; ++k) {
        const auto [m, n] = l.dual_coords(rep.coupling * window.corner(k) + rep.theta0 - theta);
        lo[0] = std::min(lo[0], m);
        hi[0] = std::max(hi[0], m);
        lo[1] = std::min(lo[1], n);
        hi[1] = std::max(hi[1], n);
    }
    for (long m = static_cast<long>(std::floor(lo[0])) - 1; m <= static_cast<long>(std::ceil(hi[0])) + 1; ++m) {
        for (long n = static_cast<long>(std::floor(lo[1])) - 1; n <= static_cast<long>(std::ceil(hi[1])) + 1; ++n) {
            const cd z = (theta + l.dual_point(static_cast<double>(m), static_cast<double>(n)) - rep.theta0) / rep.coupling;
            if (window.contains(z)) {
                rep.lattice_points.push_back(z);
                rep.labels.emplace_back(static_cast<int>(m), static_cast<int>(n));
            }
        }
    }
    return rep;
}

/// Eigenvalues of P truncated to the shifted Fourier basis exp(i <nu - theta, x>),
/// |m|,|n| <= bandwidth, sorted by modulus; at most `count` returned.
inline std::vector<cd> truncated_matrix_eigs(const FirstOrderOperator& op, cd z, cd theta, int bandwidth,
                                            int count = 20) {
    const int n = op.A.resolution();
    if (3 * bandwidth > n) throw Error(ErrorKind::ResolutionTooLow, "bandwidth must not exceed N/3");
    const TorusField q = op.q(z);
    const int side = 2 * bandwidth + 1;
    const int dim = side * side;
    auto coeff = [n](const TorusField& f, int m, int k) -> cd {
        // Nyquist index -N/2 has no partner; treat it as absent.
        if (std::abs(m) > n / 2 - 1 || std::abs(k) > n / 2 - 1) return 0.0;
        return f.coeff(m, k);
    };
    const cd half_i{0.0, 0.5};
    std::vector<cd> mat(static_cast<std::size_t>(dim) * dim);
    for (int a = 0; a < dim; ++a) {
        const int m1 = a / side - bandwidth, n1 = a % side - bandwidth;
        for (int b = 0; b < dim; ++b) {
            const int m2 = b / side - bandwidth, n2 = b % side - bandwidth;
            const cd mu = op.lattice.dual_point(m2, n2) - theta;
            const cd v = coeff(op.A, m1 - m2, n1 - n2) * half_i * mu + coeff(q, m1 - m2, n1 - n2);
            mat[static_cast<std::size_t>(b) * dim + a] = v;  // column major
        }
    }
    std::vector<cd> eig(dim);
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', dim, reinterpret_cast<lapack_complex_double*>(mat.data()), dim,
                                          reinterpret_cast<lapack_complex_double*>(eig.data()), nullptr, 1,
                                          nullptr, 1);
    if (info != 0) throw Error(ErrorKind::NoConvergence, "zgeev failed with info " + std::to_string(info));
    std::sort(eig.begin(), eig.end(), [](cd x, cd y) {
        return std::abs(x) != std::abs(y) ? std::abs(x) < std::abs(y)
                                          : (x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag());
    });
    eig.resize(std::min<std::size_t>(eig.size(), static_cast<std::size_t>(count)));
    return eig;
}

/// Leading Grushin entry (i/2) theta - mean(B q(z)); vanishes exactly at theta0(z).
inline cd e_minus_plus_leading(const FirstOrderOperator& op, cd theta, cd z) {
    return cd(0.0, 0.5) * theta - op.Bq(z).mean();
}

}  // namespace bsq
