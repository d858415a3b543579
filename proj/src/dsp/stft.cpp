// SPDX-License-Identifier: Apache-2.0
#include "mvn/dsp/stft.hpp"

#include <cmath>
#include <numbers>

#include "mvn/dsp/fft.hpp"
#include "mvn/errors.hpp"

namespace mvn::dsp {

using numcore::Shape;
using numcore::Tensor;

double Waveform::energy() const {
  double e = 0.0;
  for (double v : samples) e += v * v;
  return e;
}

std::size_t frame_count(std::size_t length, std::size_t frame_size, std::size_t hop) {
  if (length <= frame_size) return 1;
  return (length - frame_size + hop - 1) / hop + 1;
}

std::size_t SpectrogramMeta::frames() const { return frame_count(length, frame_size, hop); }

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

namespace {

bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

// Overlapped squared-window envelope over the padded length.
std::vector<double> window_envelope(const std::vector<double>& window, std::size_t frames, std::size_t hop) {
  const std::size_t n = window.size();
  std::vector<double> env((frames - 1) * hop + n, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < n; ++i) env[t * hop + i] += window[i] * window[i];
  return env;
}

constexpr double kEnvelopeFloor = 1e-10;

void check_meta(const SpectrogramMeta& meta, std::size_t frames, std::size_t bins) {
  if (meta.window != "hann") throw ConfigError("unsupported window '" + meta.window + "'");
  require_cola(meta);
  if (bins != meta.bins() || frames != meta.frames()) {
    throw DimensionError("spectrogram of " + std::to_string(frames) + "x" + std::to_string(bins) +
                         " does not match metadata (" + std::to_string(meta.frames()) + "x" +
                         std::to_string(meta.bins()) + ")");
  }
}

}  // namespace

void require_cola(const SpectrogramMeta& meta) {
  if (!is_power_of_two(meta.frame_size)) {
    throw ConfigError("frame_size must be a power of two, got " + std::to_string(meta.frame_size));
  }
  if (meta.hop == 0 || meta.frame_size % meta.hop != 0 || meta.frame_size / meta.hop < 2) {
    throw ConfigError("hop " + std::to_string(meta.hop) + " does not satisfy constant overlap-add for a Hann window of " +
                      std::to_string(meta.frame_size));
  }
}

Spectrogram stft(const Waveform& w, std::size_t frame_size, std::size_t hop) {
  if (w.samples.empty()) throw InputError("stft: empty signal");
  if (!is_power_of_two(frame_size)) {
    throw ConfigError("frame_size must be a power of two, got " + std::to_string(frame_size));
  }
  if (hop == 0 || hop > frame_size) throw ConfigError("hop must be in (0, frame_size]");

  Spectrogram s;
  s.meta.frame_size = frame_size;
  s.meta.hop = hop;
  s.meta.length = w.samples.size();
  s.meta.sample_rate = w.sample_rate;
  const std::size_t frames = s.meta.frames();
  const std::size_t bins = s.meta.bins();
  s.magnitudes = Tensor(Shape{frames, bins});
  s.phases = Tensor(Shape{frames, bins});

  const auto window = hann_window(frame_size);
  std::vector<double> frame(frame_size);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < frame_size; ++i) {
      const std::size_t idx = t * hop + i;
      frame[i] = idx < w.samples.size() ? w.samples[idx] * window[i] : 0.0;
    }
    fft::rfft(frame, spec);
    for (std::size_t f = 0; f < bins; ++f) {
      s.magnitudes.at(t, f) = std::abs(spec[f]);
      double ph = std::arg(spec[f]);
      if (ph <= -std::numbers::pi) ph = std::numbers::pi;
      s.phases.at(t, f) = ph;
    }
  }
  return s;
}

std::vector<std::complex<double>> to_complex(const Spectrogram& s) {
  std::vector<std::complex<double>> out(s.magnitudes.size());
  auto m = s.magnitudes.data();
  auto p = s.phases.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::polar(m[i], p[i]);
  return out;
}

Waveform istft(std::span<const std::complex<double>> frames_data, const SpectrogramMeta& meta) {
  const std::size_t bins = meta.bins();
  if (frames_data.size() % bins != 0) throw DimensionError("istft: frame data is not a multiple of the bin count");
  const std::size_t frames = frames_data.size() / bins;
  check_meta(meta, frames, bins);

  const std::size_t n = meta.frame_size;
  const auto window = hann_window(n);
  const auto env = window_envelope(window, frames, meta.hop);
  std::vector<double> acc(env.size(), 0.0);
  std::vector<double> buf(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    fft::irfft(frames_data.subspan(t * bins, bins), buf);
    for (std::size_t i = 0; i < n; ++i) acc[t * meta.hop + i] += window[i] * buf[i] * inv_n;
  }
  Waveform out;
  out.sample_rate = meta.sample_rate;
  out.samples.assign(meta.length, 0.0);
  for (std::size_t i = 0; i < meta.length; ++i) out.samples[i] = env[i] > kEnvelopeFloor ? acc[i] / env[i] : 0.0;
  return out;
}

Waveform istft(const Spectrogram& s) {
  const auto frames = to_complex(s);
  return istft(frames, s.meta);
}

Waveform recombine(const Tensor& magnitudes, const Spectrogram& phase_source) {
  if (magnitudes.shape() != phase_source.phases.shape()) {
    throw DimensionError("recombine: magnitudes " + numcore::shape_string(magnitudes.shape()) +
                         " vs phase source " + numcore::shape_string(phase_source.phases.shape()));
  }
  std::vector<std::complex<double>> frames(magnitudes.size());
  auto p = phase_source.phases.data();
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = std::polar(1.0, p[i]) * magnitudes[i];
  return istft(frames, phase_source.meta);
}

numcore::Var recombine(numcore::Var magnitudes, const Spectrogram& phase_source) {
  Waveform w = recombine(magnitudes.value(), phase_source);
  const SpectrogramMeta meta = phase_source.meta;
  const Tensor phases = phase_source.phases;
  return magnitudes.tape()->record(
      "recombine", Tensor::vector(std::move(w.samples)), {magnitudes},
      [magnitudes, meta, phases](numcore::Tape& t, std::span<const double> g) {
        auto gm = t.grad_sink(magnitudes);
        if (gm.empty()) return;
        const std::size_t n = meta.frame_size;
        const std::size_t bins = meta.bins();
        const std::size_t frames = meta.frames();
        const auto window = hann_window(n);
        const auto env = window_envelope(window, frames, meta.hop);
        std::vector<double> seg(n);
        std::vector<std::complex<double>> spec(bins);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t t_idx = 0; t_idx < frames; ++t_idx) {
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = t_idx * meta.hop + i;
            seg[i] = (idx < meta.length && env[idx] > kEnvelopeFloor) ? window[i] * g[idx] / env[idx] : 0.0;
          }
          fft::rfft(seg, spec);
          for (std::size_t f = 0; f < bins; ++f) {
            const double weight = (f == 0 || f == bins - 1) ? inv_n : 2.0 * inv_n;
            const double ph = phases.at(t_idx, f);
            gm[t_idx * bins + f] += weight * (std::cos(ph) * spec[f].real() + std::sin(ph) * spec[f].imag());
          }
        }
      });
}

}  // namespace mvn::dsp
