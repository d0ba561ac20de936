// Iterative radix-2 FFT, used for the non-circular SSM convolution.

#ifndef RADDET_FFT_HPP
#define RADDET_FFT_HPP

#include <complex>
#include <numbers>
#include <vector>

#include "raddet/common.hpp"

namespace raddet {

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place radix-2 FFT; a.size() must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;
    require((n & (n - 1)) == 0, "fft_pow2: length must be a power of two");

    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Linear (non-circular) convolution of x and h via zero-padding to the next
// power of two >= |x|+|h|-1. Returns the full length |x|+|h|-1 result.
inline std::vector<double> fft_convolve_full(const std::vector<double>& x,
                                             const std::vector<double>& h) {
    if (x.empty() || h.empty()) return {};
    const size_t out_len = x.size() + h.size() - 1;
    const size_t m = next_pow2(out_len);
    std::vector<std::complex<double>> fx(m), fh(m);
    for (size_t i = 0; i < x.size(); ++i) fx[i] = x[i];
    for (size_t i = 0; i < h.size(); ++i) fh[i] = h[i];
    fft_pow2(fx, false);
    fft_pow2(fh, false);
    for (size_t i = 0; i < m; ++i) fx[i] *= fh[i];
    fft_pow2(fx, true);
    std::vector<double> out(out_len);
    for (size_t i = 0; i < out_len; ++i) out[i] = fx[i].real();
    return out;
}

}  // namespace raddet

#endif  // RADDET_FFT_HPP
