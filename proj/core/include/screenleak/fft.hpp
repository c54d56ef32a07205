#pragma once

#include <complex>
#include <span>
#include <vector>

namespace screenleak::fft {

using Complex = std::complex<double>;

/// Real-to-complex forward transform; returns n/2 + 1 bins (unnormalized).
std::vector<Complex> rfft(std::span<const double> x);

/// Inverse of rfft for a length-n real signal, normalized so irfft(rfft(x), n) == x.
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

/// Complex inverse transform, normalized by 1/n.
std::vector<Complex> ifft(std::span<const Complex> spectrum);

/// Smallest size >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t fast_size(std::size_t n);

}  // namespace screenleak::fft
