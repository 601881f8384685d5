#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"

namespace bsq {

/// Chebyshev points of the first kind on [-1, 1], j = 0..degree.
inline std::vector<double> chebyshev_nodes(int degree) {
    std::vector<double> x(degree + 1);
    for (int j = 0; j <= degree; ++j) x[j] = std::cos(std::numbers::pi * (j + 0.5) / (degree + 1));
    return x;
}

namespace detail {

inline std::vector<double> chebyshev_transform(const std::vector<double>& values) {
    const int n = static_cast<int>(values.size());
    std::vector<double> c(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += values[j] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
        c[k] = 2.0 * s / n;
    }
    c[0] *= 0.5;
    return c;
}

template <class T>
T clenshaw(const std::vector<double>& c, T t) {
    T b1 = 0.0, b2 = 0.0;
    for (int k = static_cast<int>(c.size()) - 1; k >= 1; --k) {
        const T b0 = 2.0 * t * b1 - b2 + c[k];
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + c[0];
}

}  // namespace detail

/// Chebyshev interpolant on [lo, hi]; evaluates at real or complex arguments.
class Chebyshev {
public:
    Chebyshev() = default;

    template <class Fn>
    static Chebyshev fit(Fn&& f, double lo, double hi, int degree) {
        if (!(hi > lo) || degree < 1) throw Error(ErrorKind::OutOfRange, "bad Chebyshev interval or degree");
        std::vector<double> v;
        for (double t : chebyshev_nodes(degree)) v.push_back(f(0.5 * (lo + hi) + 0.5 * (hi - lo) * t));
        Chebyshev c;
        c.lo_ = lo;
        c.hi_ = hi;
        c.c_ = detail::chebyshev_transform(v);
        return c;
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& coeffs() const { return c_; }

    template <class T>
    T to_unit(T x) const {
        return (2.0 * x - (lo_ + hi_)) / (hi_ - lo_);
    }
    double operator()(double x) const { return detail::clenshaw(c_, to_unit(x)); }
    cd operator()(cd x) const { return detail::clenshaw(c_, to_unit(x)); }

    Chebyshev derivative() const {
        const int n = static_cast<int>(c_.size());
        std::vector<double> d(n, 0.0);
        // d_{k-1} = d_{k+1} + 2 k c_k
        for (int k = n - 1; k >= 1; --k) d[k - 1] = (k + 1 < n ? d[k + 1] : 0.0) + 2.0 * k * c_[k];
        d[0] *= 0.5;
        for (double& v : d) v *= 2.0 / (hi_ - lo_);
        Chebyshev r = *this;
        r.c_ = std::move(d);
        return r;
    }

    /// Size of the last two coefficients relative to the largest one.
    double tail() const {
        double big = 0.0;
        for (double v : c_) big = std::max(big, std::abs(v));
        const std::size_t n = c_.size();
        return big > 0.0 ? (std::abs(c_[n - 1]) + std::abs(c_[n - 2])) / big : 0.0;
    }

    /// Parameter of the Bernstein ellipse through x.
    double ellipse_rho(cd x) const {
        const cd t = to_unit(x);
        cd r = t + std::sqrt(t - 1.0) * std::sqrt(t + 1.0);
        return std::max(std::abs(r), 1.0 / std::abs(r));
    }

private:
    double lo_ = -1.0;
    double hi_ = 1.0;
    std::vector<double> c_;
};

/// Tensor Chebyshev interpolant of a map R^2 -> R^2 on a rectangle, built from
/// values at the product nodes (index [i * (degree + 1) + j] for re node i, im node j).
class Chebyshev2D {
public:
    Chebyshev2D() = default;

    static std::vector<cd> nodes(double re_lo, double re_hi, double im_lo, double im_hi, int degree) {
        const auto t = chebyshev_nodes(degree);
        std::vector<cd> z;
        for (double s : t) {
            for (double u : t) z.emplace_back(0.5 * (re_lo + re_hi) + 0.5 * (re_hi - re_lo) * s,
                                               0.5 * (im_lo + im_hi) + 0.5 * (im_hi - im_lo) * u);
        }
        return z;
    }

    static Chebyshev2D from_values(double re_lo, double re_hi, double im_lo, double im_hi, int degree,
                                   const std::vector<std::array<double, 2>>& values) {
        const int n = degree + 1;
        if (static_cast<int>(values.size()) != n * n) throw Error(ErrorKind::OutOfRange, "value grid has wrong size");
        Chebyshev2D c;
        c.box_ = {re_lo, re_hi, im_lo, im_hi};
        c.n_ = n;
        for (int comp = 0; comp < 2; ++comp) {
            // Transform along im for each re node, then along re.
            std::vector<double> tmp(n * n);
            for (int i = 0; i < n; ++i) {
                std::vector<double> row(n);
                for (int j = 0; j < n; ++j) row[j] = values[i * n + j][comp];
                const auto cr = detail::chebyshev_transform(row);
                for (int j = 0; j < n; ++j) tmp[i * n + j] = cr[j];
            }
            c.c_[comp].assign(n * n, 0.0);
            for (int j = 0; j < n; ++j) {
                std::vector<double> col(n);
                for (int i = 0; i < n; ++i) col[i] = tmp[i * n + j];
                const auto cc = detail::chebyshev_transform(col);
                for (int i = 0; i < n; ++i) c.c_[comp][i * n + j] = cc[i];
            }
        }
        return c;
    }

    std::array<double, 2> operator()(cd z) const {
        const double s = (2.0 * z.real() - (box_[0] + box_[1])) / (box_[1] - box_[0]);
        const double u = (2.0 * z.imag() - (box_[2] + box_[3])) / (box_[3] - box_[2]);
        std::vector<double> ts(n_), tu(n_);
        for (int k = 0; k < n_; ++k) {
            ts[k] = k == 0 ? 1.0 : k == 1 ? s : 2.0 * s * ts[k - 1] - ts[k - 2];
            tu[k] = k == 0 ? 1.0 : k == 1 ? u : 2.0 * u * tu[k - 1] - tu[k - 2];
        }
        std::array<double, 2> out{0.0, 0.0};
        for (int comp = 0; comp < 2; ++comp) {
            for (int i = 0; i < n_; ++i) {
                double row = 0.0;
                for (int j = 0; j < n_; ++j) row += c_[comp][i * n_ + j] * tu[j];
                out[comp] += ts[i] * row;
            }
        }
        return out;
    }

private:
    std::array<double, 4> box_{};
    int n_ = 0;
    std::array<std::vector<double>, 2> c_;
};

}  // namespace bsq
