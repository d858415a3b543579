// SPDX-License-Identifier: Apache-2.0
#include "mvn/dsp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "mvn/errors.hpp"

namespace mvn::dsp::fft {

namespace {

// fftw planning is not thread-safe; execution with the new-array interface is.
std::mutex plan_mutex;

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const Plans& plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(plan_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(n);
  std::vector<fftw_complex> spec(n / 2 + 1);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  Plans p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(), spec.data(), flags);
  p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.data(), real.data(), flags);
  return cache.emplace(n, p).first->second;
}

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  if (n == 0 || out.size() != n / 2 + 1) throw DimensionError("rfft: output must hold n/2+1 bins");
  const auto& p = plans_for(n);
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(p.forward, buf.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

void irfft(std::span<const std::complex<double>> in, std::span<double> out) {
  const std::size_t n = out.size();
  if (n == 0 || in.size() != n / 2 + 1) throw DimensionError("irfft: input must hold n/2+1 bins");
  const auto& p = plans_for(n);
  // c2r overwrites its input
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(buf.data()), out.data());
}

}  // namespace mvn::dsp::fft
