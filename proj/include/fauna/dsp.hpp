#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace fauna::dsp {

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 FFT. size must be a power of two.
/// Unnormalized forward transform; pass inverse=true for the conjugate
/// transform scaled by 1/N.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

/// Forward FFT of a real signal zero-padded to fft_size, returning bins
/// 0..fft_size/2 inclusive.
std::vector<std::complex<double>> rfft(const std::vector<double>& x,
                                       std::size_t fft_size);

/// Periodic Hann window: w[n] = 0.5*(1 - cos(2*pi*n/size)). Adjacent
/// half-overlapped windows sum to exactly 1.
std::vector<double> hann_window(std::size_t size);

std::vector<double> hamming_window(std::size_t size);

/// Zeroth-order modified Bessel function of the first kind (series form),
/// used by the Kaiser window.
double bessel_i0(double x);

} // namespace fauna::dsp
