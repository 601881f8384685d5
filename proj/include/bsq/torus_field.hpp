#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "lattice.hpp"

namespace bsq {

/// Centered frequency index for storage position i on an N-point axis: [-N/2, N/2).
inline int centered_index(int i, int n) { return i < n / 2 ? i : i - n; }
inline int storage_index(int m, int n) { return ((m % n) + n) % n; }

/// Band-limited function on C/L sampled on the N x N grid x = (j/N) e1 + (k/N) e2.
///
/// With Floquet shift theta the frequencies are nu - theta for nu in the dual
/// lattice, so f(x) = sum_nu c(nu) exp(i <nu - theta, x>). Coefficients are
/// stored in FFT order, (m, n) at storage_index(m)*N + storage_index(n), and
/// are true Fourier coefficients (forward transform scaled by 1/N^2). Hence
/// mean |f|^2 over the grid equals sum |c|^2. Values are immutable; copies
/// share storage.
class TorusField {
public:
    TorusField() = default;

    static TorusField from_samples(const Lattice& lattice, int n, std::vector<cd> samples, cd theta = 0.0) {
        check_resolution(n);
        if (samples.size() != static_cast<std::size_t>(n) * n) {
            throw Error(ErrorKind::InvalidModel, "sample count does not match resolution");
        }
        TorusField f(lattice, n, theta);
        f.state_->samples = std::move(samples);
        return f;
    }

    static TorusField from_coeffs(const Lattice& lattice, int n, std::vector<cd> coeffs, cd theta = 0.0) {
        check_resolution(n);
        if (coeffs.size() != static_cast<std::size_t>(n) * n) {
            throw Error(ErrorKind::InvalidModel, "coefficient count does not match resolution");
        }
        TorusField f(lattice, n, theta);
        const cd reduced = f.theta_;
        if (std::abs(reduced - theta) > 1e-12 * (1.0 + std::abs(theta))) {
            // Relabel coefficients onto the reduced shift: nu - theta = (nu + l) - reduced.
            const auto [lm, ln] = lattice.dual_coords(theta - reduced);
            const int sm = static_cast<int>(std::lround(lm));
            const int sn = static_cast<int>(std::lround(ln));
            std::vector<cd> relabeled(coeffs.size());
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k) {
                    const int m = centered_index(j, n) - sm;
                    const int q = centered_index(k, n) - sn;
                    relabeled[storage_index(m, n) * n + storage_index(q, n)] = coeffs[j * n + k];
                }
            }
            coeffs = std::move(relabeled);
        }
        f.state_->samples = f.twisted(fft::backward(n, coeffs), -1);
        std::call_once(f.state_->once, [&] { f.state_->coeffs = std::move(coeffs); });
        return f;
    }

    template <class Fn>
    static TorusField from_function(const Lattice& lattice, int n, Fn&& fn, cd theta = 0.0) {
        check_resolution(n);
        std::vector<cd> s(static_cast<std::size_t>(n) * n);
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                s[j * n + k] = fn(grid_point(lattice, n, j, k));
            }
        }
        return from_samples(lattice, n, std::move(s), theta);
    }

    static TorusField constant(const Lattice& lattice, int n, cd value) {
        check_resolution(n);
        return from_samples(lattice, n, std::vector<cd>(static_cast<std::size_t>(n) * n, value));
    }

    static TorusField zero(const Lattice& lattice, int n, cd theta = 0.0) {
        check_resolution(n);
        return from_samples(lattice, n, std::vector<cd>(static_cast<std::size_t>(n) * n), theta);
    }

    /// amplitude * exp(i <nu_{m,n} - theta, x>).
    static TorusField mode(const Lattice& lattice, int n, int m, int q, cd amplitude = 1.0, cd theta = 0.0) {
        check_resolution(n);
        std::vector<cd> c(static_cast<std::size_t>(n) * n);
        c[storage_index(m, n) * n + storage_index(q, n)] = amplitude;
        return from_coeffs(lattice, n, std::move(c), theta);
    }

    static cd grid_point(const Lattice& lattice, int n, int j, int k) {
        return lattice.point(static_cast<double>(j) / n, static_cast<double>(k) / n);
    }

    const Lattice& lattice() const { return lattice_; }
    int resolution() const { return n_; }
    cd shift() const { return theta_; }
    std::size_t size() const { return state_->samples.size(); }
    const std::vector<cd>& samples() const { return state_->samples; }
    /// Fourier coefficients, computed on first use and cached.
    const std::vector<cd>& coeffs() const {
        std::call_once(state_->once, [this] { state_->coeffs = fft::forward(n_, twisted(state_->samples, +1)); });
        return state_->coeffs;
    }

    cd sample(int j, int k) const { return state_->samples[j * n_ + k]; }
    cd coeff(int m, int q) const {
        if (m < -n_ / 2 || m >= n_ - n_ / 2 || q < -n_ / 2 || q >= n_ - n_ / 2) return 0.0;
        return coeffs()[storage_index(m, n_) * n_ + storage_index(q, n_)];
    }
    cd point(int j, int k) const { return grid_point(lattice_, n_, j, k); }

    /// Frequency nu - theta carried by storage slot (j, k).
    cd frequency_at(int j, int k) const {
        return lattice_.dual_point(centered_index(j, n_), centered_index(k, n_)) - theta_;
    }
    bool nyquist_at(int j, int k) const { return j == n_ / 2 || k == n_ / 2; }

    cd mean() const { return coeff(0, 0); }

    double sup_norm() const {
        double s = 0.0;
        for (const cd& v : samples()) s = std::max(s, std::abs(v));
        return s;
    }
    double coeff_sup_norm() const {
        double s = 0.0;
        for (const cd& v : coeffs()) s = std::max(s, std::abs(v));
        return s;
    }

    /// Trigonometric-polynomial value at an arbitrary point of C.
    cd evaluate(cd x) const {
        cd acc = 0.0;
        for (int j = 0; j < n_; ++j) {
            for (int k = 0; k < n_; ++k) {
                const cd c = coeffs()[j * n_ + k];
                if (c == 0.0) continue;
                acc += c * std::exp(cd(0.0, pairing(frequency_at(j, k), x)));
            }
        }
        return acc;
    }

    bool compatible(const TorusField& other) const {
        return n_ == other.n_ && lattice_.e1 == other.lattice_.e1 && lattice_.e2 == other.lattice_.e2;
    }

private:
    // Samples and the lazily filled coefficient cache, shared between copies.
    struct State {
        std::vector<cd> samples;
        std::once_flag once;
        std::vector<cd> coeffs;
    };

    TorusField(const Lattice& lattice, int n, cd theta)
        : lattice_(lattice), n_(n), theta_(reduce_shift(lattice, theta)), state_(std::make_shared<State>()) {}

    static void check_resolution(int n) {
        if (n < 4 || n % 2 != 0) throw Error(ErrorKind::InvalidModel, "resolution must be even and at least 4");
    }

    // Multiply by exp(sign * i <theta, x>) on the grid.
    std::vector<cd> twisted(std::vector<cd> v, int sign) const {
        if (theta_ == 0.0) return v;
        for (int j = 0; j < n_; ++j) {
            for (int k = 0; k < n_; ++k) {
                v[j * n_ + k] *= std::exp(cd(0.0, sign * pairing(theta_, point(j, k))));
            }
        }
        return v;
    }

    Lattice lattice_{};
    int n_ = 0;
    cd theta_ = 0.0;
    std::shared_ptr<State> state_ = std::make_shared<State>();
};

// ---------------------------------------------------------------------------
// Pointwise algebra

namespace detail {

inline void require_compatible(const TorusField& a, const TorusField& b) {
    if (!a.compatible(b)) throw Error(ErrorKind::InvalidModel, "fields live on different grids or lattices");
}

template <class Op>
TorusField zip(const TorusField& a, const TorusField& b, cd theta, Op op) {
    require_compatible(a, b);
    std::vector<cd> s(a.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = op(a.samples()[i], b.samples()[i]);
    return TorusField::from_samples(a.lattice(), a.resolution(), std::move(s), theta);
}

inline void require_same_shift(const TorusField& a, const TorusField& b) {
    if (dual_distance(a.lattice(), a.shift() - b.shift()) > 1e-12) {
        throw Error(ErrorKind::InvalidModel, "adding fields with different Floquet shifts");
    }
}

}  // namespace detail

inline TorusField operator+(const TorusField& a, const TorusField& b) {
    detail::require_same_shift(a, b);
    return detail::zip(a, b, a.shift(), std::plus<>{});
}
inline TorusField operator-(const TorusField& a, const TorusField& b) {
    detail::require_same_shift(a, b);
    return detail::zip(a, b, a.shift(), std::minus<>{});
}
/// Collocation product; the shift of the product is the sum of shifts.
inline TorusField operator*(const TorusField& a, const TorusField& b) {
    return detail::zip(a, b, a.shift() + b.shift(), std::multiplies<>{});
}

template <class Fn>
TorusField map_samples(const TorusField& u, Fn&& fn) {
    std::vector<cd> s(u.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = fn(u.samples()[i]);
    return TorusField::from_samples(u.lattice(), u.resolution(), std::move(s), u.shift());
}

inline TorusField operator*(cd c, const TorusField& u) {
    return map_samples(u, [c](cd v) { return c * v; });
}
inline TorusField operator*(const TorusField& u, cd c) { return c * u; }
inline TorusField operator-(const TorusField& u) { return cd(-1.0) * u; }
inline TorusField operator+(const TorusField& u, cd c) {
    return map_samples(u, [c](cd v) { return v + c; });
}
inline TorusField operator-(const TorusField& u, cd c) { return u + (-c); }

inline TorusField conj(const TorusField& u) {
    std::vector<cd> s(u.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::conj(u.samples()[i]);
    return TorusField::from_samples(u.lattice(), u.resolution(), std::move(s), -u.shift());
}

inline TorusField reciprocal(const TorusField& u) {
    for (const cd& v : u.samples()) {
        if (std::abs(v) == 0.0) throw Error(ErrorKind::InvalidModel, "reciprocal of a vanishing field");
    }
    std::vector<cd> s(u.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 / u.samples()[i];
    return TorusField::from_samples(u.lattice(), u.resolution(), std::move(s), -u.shift());
}

// ---------------------------------------------------------------------------
// Spectral operators

template <class Mult>
TorusField apply_multiplier(const TorusField& u, Mult&& mult) {
    const int n = u.resolution();
    std::vector<cd> c(u.coeffs());
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            cd& slot = c[j * n + k];
            slot = u.nyquist_at(j, k) ? cd(0.0) : slot * mult(u.frequency_at(j, k), j, k);
        }
    }
    return TorusField::from_coeffs(u.lattice(), n, std::move(c), u.shift());
}

/// Zero the Nyquist row and column.
inline TorusField band_limit(const TorusField& u) {
    return apply_multiplier(u, [](cd, int, int) { return cd(1.0); });
}

/// d/dxbar: multiplier (i/2) kappa for frequency kappa.
inline TorusField dbar_apply(const TorusField& u) {
    return apply_multiplier(u, [](cd kappa, int, int) { return cd(0.0, 0.5) * kappa; });
}
/// d/dx: multiplier (i/2) conj(kappa).
inline TorusField d_apply(const TorusField& u) {
    return apply_multiplier(u, [](cd kappa, int, int) { return cd(0.0, 0.5) * std::conj(kappa); });
}
/// Real partial derivatives d/dx1, d/dx2 (x = x1 + i x2).
inline TorusField partial_1(const TorusField& u) {
    return apply_multiplier(u, [](cd kappa, int, int) { return cd(0.0, kappa.real()); });
}
inline TorusField partial_2(const TorusField& u) {
    return apply_multiplier(u, [](cd kappa, int, int) { return cd(0.0, kappa.imag()); });
}

/// Solve du/dxbar = f coefficientwise. When the zero frequency is present its
/// coefficient must vanish and the solution is normalized to zero mean.
inline TorusField dbar_solve(const TorusField& f, double tol_mean = 1e-12) {
    const int n = f.resolution();
    std::vector<cd> c(f.coeffs());
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            cd& slot = c[j * n + k];
            if (f.nyquist_at(j, k)) {
                slot = 0.0;
                continue;
            }
            const cd kappa = f.frequency_at(j, k);
            if (j == 0 && k == 0 && f.shift() == 0.0) {
                if (std::abs(slot) > tol_mean) {
                    throw Error(ErrorKind::NonSolvable,
                                "zero-frequency coefficient " + format_sci(std::abs(slot)) + " exceeds tolerance");
                }
                slot = 0.0;
                continue;
            }
            if (std::abs(kappa) < 1e-10) throw Error(ErrorKind::SmallDivisor, "frequency too close to zero");
            slot /= cd(0.0, 0.5) * kappa;
        }
    }
    return TorusField::from_coeffs(f.lattice(), n, std::move(c), f.shift());
}

/// sum over frequencies of (1 + |kappa|)^m |c(kappa)|.
inline double weighted_norm(const TorusField& u, double m = 2.5) {
    const int n = u.resolution();
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            const double c = std::abs(u.coeffs()[j * n + k]);
            if (c != 0.0) s += std::pow(1.0 + std::abs(u.frequency_at(j, k)), m) * c;
        }
    }
    return s;
}

/// Copy with the zero-frequency coefficient removed (unshifted fields only).
inline TorusField without_mean(const TorusField& u) {
    if (u.shift() != 0.0) return u;
    std::vector<cd> c(u.coeffs());
    c[0] = 0.0;
    return TorusField::from_coeffs(u.lattice(), u.resolution(), std::move(c));
}

/// Keep only modes with 3|m| < N and 3|n| < N.
inline TorusField dealias(const TorusField& u) {
    const int n = u.resolution();
    std::vector<cd> c(u.coeffs());
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            if (3 * std::abs(centered_index(j, n)) >= n || 3 * std::abs(centered_index(k, n)) >= n) c[j * n + k] = 0.0;
        }
    }
    return TorusField::from_coeffs(u.lattice(), n, std::move(c), u.shift());
}

enum class Dealias { None, TwoThirds };

inline TorusField multiply(const TorusField& a, const TorusField& b, Dealias mode = Dealias::TwoThirds) {
    TorusField p = a * b;
    return mode == Dealias::TwoThirds ? dealias(p) : p;
}

/// Zero-mean periodic part plus linear part a x + b conj(x).
struct GradPeriodicFunction {
    TorusField periodic;
    cd a = 0.0;
    cd b = 0.0;

    cd evaluate(cd x) const { return periodic.evaluate(x) + a * x + b * std::conj(x); }
    /// Gradient samples (d/dx, d/dxbar) on the grid.
    TorusField dx() const { return d_apply(periodic) + a; }
    TorusField dxbar() const { return dbar_apply(periodic) + b; }
};

}  // namespace bsq
