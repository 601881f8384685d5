#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace bsq::fft {

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

// FFTW planning is not thread-safe; execution through fftw_execute_dft is.
inline const PlanPair& plans(int n) {
    static std::mutex mutex;
    static std::map<int, PlanPair> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const std::size_t size = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    auto* in = fftw_alloc_complex(size);
    auto* out = fftw_alloc_complex(size);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p;
    p.forward = fftw_plan_dft_2d(n, n, in, out, FFTW_FORWARD, flags);
    p.backward = fftw_plan_dft_2d(n, n, in, out, FFTW_BACKWARD, flags);
    fftw_free(in);
    fftw_free(out);
    return cache.emplace(n, p).first->second;
}

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }
inline fftw_complex* as_fftw(const std::complex<double>* p) {
    // FFTW never writes through the input pointer of an out-of-place plan.
    return reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(p));
}

}  // namespace detail

/// Forward 2-D transform of an n x n row-major grid, normalized by 1/n^2 so the
/// output holds true Fourier coefficients.
inline std::vector<std::complex<double>> forward(int n, std::span<const std::complex<double>> samples) {
    std::vector<std::complex<double>> out(samples.size());
    fftw_execute_dft(detail::plans(n).forward, detail::as_fftw(samples.data()), detail::as_fftw(out.data()));
    const double scale = 1.0 / (static_cast<double>(n) * n);
    for (auto& c : out) c *= scale;
    return out;
}

/// Unnormalized synthesis: samples = sum of coefficients times exponentials.
inline std::vector<std::complex<double>> backward(int n, std::span<const std::complex<double>> coeffs) {
    std::vector<std::complex<double>> out(coeffs.size());
    fftw_execute_dft(detail::plans(n).backward, detail::as_fftw(coeffs.data()), detail::as_fftw(out.data()));
    return out;
}

}  // namespace bsq::fft
