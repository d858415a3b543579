// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace mvn::dsp::fft {

/// Real-to-complex forward DFT (e^{-i}); out has n/2 + 1 bins.
void rfft(std::span<const double> in, std::span<std::complex<double>> out);

/// Unnormalized complex-to-real inverse; out has n samples. Imaginary parts of
/// the DC and Nyquist bins are ignored.
void irfft(std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace mvn::dsp::fft
