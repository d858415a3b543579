// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvn/numcore/tape.hpp"
#include "mvn/numcore/tensor.hpp"

namespace mvn::dsp {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double energy() const;
};

/// Analysis parameters shared by every channel of a scene.
struct SpectrogramMeta {
  std::size_t frame_size = 1024;
  std::size_t hop = 512;
  std::string window = "hann";
  std::size_t length = 0;  ///< original signal length in samples
  int sample_rate = 16000;

  std::size_t bins() const { return frame_size / 2 + 1; }
  std::size_t frames() const;
  friend bool operator==(const SpectrogramMeta&, const SpectrogramMeta&) = default;
};

/// One-sided STFT of one channel, split into magnitude and phase (T×F each).
struct Spectrogram {
  SpectrogramMeta meta;
  numcore::Tensor magnitudes;
  numcore::Tensor phases;

  std::size_t frames() const { return magnitudes.dim(0); }
  std::size_t bins() const { return magnitudes.dim(1); }
};

/// Number of frames after zero-padding the tail so the last frame is complete.
std::size_t frame_count(std::size_t length, std::size_t frame_size, std::size_t hop);

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

Spectrogram stft(const Waveform& w, std::size_t frame_size, std::size_t hop);

/// Complex frames (T×F, row-major) rebuilt from magnitude and phase.
std::vector<std::complex<double>> to_complex(const Spectrogram& s);

/// Weighted overlap-add inverse: each frame is windowed again and the sum is
/// divided by the overlapped squared-window envelope. Output is trimmed to
/// meta.length.
Waveform istft(std::span<const std::complex<double>> frames, const SpectrogramMeta& meta);
Waveform istft(const Spectrogram& s);

/// Waveform from predicted magnitudes with the phase of `phase_source`.
Waveform recombine(const numcore::Tensor& magnitudes, const Spectrogram& phase_source);

/// Differentiable recombine. Linear in `magnitudes` for a fixed phase; the
/// output is a rank-1 waveform of meta.length samples.
numcore::Var recombine(numcore::Var magnitudes, const Spectrogram& phase_source);

/// Throws ConfigError unless the window/hop pair overlap-adds to a constant.
void require_cola(const SpectrogramMeta& meta);

}  // namespace mvn::dsp
