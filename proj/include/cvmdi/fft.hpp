#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "cvmdi/error.hpp"

namespace cvmdi::fft {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline cvec forward(const cvec& x) {
    Eigen::FFT<double> f;
    cvec out;
    f.fwd(out, x);
    return out;
}

/// Inverse transform including the 1/N scale.
inline cvec inverse(const cvec& x) {
    Eigen::FFT<double> f;
    cvec out;
    f.inv(out, x);
    return out;
}

/// Full linear convolution y = x * h (length |x| + |h| - 1) by overlap-save.
inline cvec convolve(std::span<const cplx> x, std::span<const double> h) {
    if (x.empty() || h.empty()) return {};
    const std::size_t m = h.size();
    const std::size_t out_len = x.size() + m - 1;
    const std::size_t nfft = std::max<std::size_t>(next_pow2(4 * m), 1024);
    const std::size_t step = nfft - (m - 1);

    Eigen::FFT<double> f;
    cvec hpad(nfft, cplx{}), H;
    for (std::size_t i = 0; i < m; ++i) hpad[i] = h[i];
    f.fwd(H, hpad);

    cvec y(out_len);
    cvec block(nfft), X, Y, yb;
    // Output sample n needs inputs n-m+1 .. n; block b covers outputs [b*step, b*step + step).
    for (std::size_t start = 0; start < out_len; start += step) {
        for (std::size_t i = 0; i < nfft; ++i) {
            const long long src = static_cast<long long>(start + i) - static_cast<long long>(m - 1);
            block[i] = (src >= 0 && static_cast<std::size_t>(src) < x.size()) ? x[static_cast<std::size_t>(src)] : cplx{};
        }
        f.fwd(X, block);
        Y.resize(nfft);
        for (std::size_t i = 0; i < nfft; ++i) Y[i] = X[i] * H[i];
        f.inv(yb, Y);
        const std::size_t count = std::min(step, out_len - start);
        for (std::size_t i = 0; i < count; ++i) y[start + i] = yb[m - 1 + i];
    }
    return y;
}

/// c[d] = Σ_n conj(a[n])·b[n+d] for d = 0 .. max_lag (zero outside b).
inline cvec cross_correlate(std::span<const cplx> a, std::span<const cplx> b, std::size_t max_lag) {
    const std::size_t nfft = next_pow2(a.size() + max_lag + 1);
    cvec pa(nfft, cplx{}), pb(nfft, cplx{});
    std::copy(a.begin(), a.end(), pa.begin());
    const std::size_t nb = std::min(b.size(), nfft);
    std::copy(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(nb), pb.begin());
    Eigen::FFT<double> f;
    cvec A, B, C, c;
    f.fwd(A, pa);
    f.fwd(B, pb);
    C.resize(nfft);
    for (std::size_t i = 0; i < nfft; ++i) C[i] = std::conj(A[i]) * B[i];
    f.inv(c, C);
    c.resize(max_lag + 1);
    return c;
}

}  // namespace cvmdi::fft
