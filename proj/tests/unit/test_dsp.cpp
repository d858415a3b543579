// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "mvn/dsp/stft.hpp"
#include "mvn/dsp/wav.hpp"
#include "mvn/errors.hpp"
#include "mvn/numcore/gradcheck.hpp"
#include "mvn/numcore/ops.hpp"

using namespace mvn::dsp;
using mvn::numcore::Tensor;

namespace {

Waveform random_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = d(rng);
  return w;
}

double interior_rel_error(const Waveform& a, const Waveform& b, std::size_t edge) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = edge; i + edge < a.size(); ++i) {
    num += (a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
    den += b.samples[i] * b.samples[i];
  }
  return std::sqrt(num / den);
}

// Independent O(N²) DFT bin of a windowed frame.
std::complex<double> naive_dft_bin(const std::vector<double>& x, std::size_t k) {
  std::complex<double> acc = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / n);
  return acc;
}

}  // namespace

TEST(Stft, FrameCountAndPadding) {
  EXPECT_EQ(frame_count(32000, 1024, 512), 62u);  // 31 hops plus a padded tail frame
  EXPECT_EQ(frame_count(4096, 1024, 512), 7u);
  EXPECT_EQ(frame_count(100, 1024, 512), 1u);
  auto s = stft(random_signal(32000, 1), 256, 128);
  EXPECT_EQ(s.frames(), 249u);
  EXPECT_EQ(s.bins(), 129u);
}

TEST(Stft, ZeroSignal) {
  Waveform w;
  w.samples.assign(4096, 0.0);
  auto s = stft(w, 1024, 512);
  for (double m : s.magnitudes.data()) EXPECT_EQ(m, 0.0);
}

TEST(Stft, EmptySignalIsInputError) {
  EXPECT_THROW(stft(Waveform{}, 1024, 512), mvn::InputError);
  EXPECT_THROW(stft(random_signal(10, 1), 1000, 500), mvn::ConfigError);
}

TEST(Stft, SineAtExactBinConcentratesInMainLobe) {
  const std::size_t n = 1024, k = 37;
  Waveform w;
  w.samples.resize(4096);
  for (std::size_t i = 0; i < w.size(); ++i)
    w.samples[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
  auto s = stft(w, n, 512);
  const auto window = hann_window(n);
  for (std::size_t t = 0; t < s.frames(); ++t) {
    double total = 0.0, lobe = 0.0;
    std::size_t argmax = 0;
    for (std::size_t f = 0; f < s.bins(); ++f) {
      const double e = s.magnitudes.at(t, f) * s.magnitudes.at(t, f);
      total += e;
      if (f + 1 >= k && f <= k + 1) lobe += e;
      if (s.magnitudes.at(t, f) > s.magnitudes.at(t, argmax)) argmax = f;
    }
    EXPECT_EQ(argmax, k);
    EXPECT_GE(lobe / total, 0.99);
    // Hann splits an on-bin tone 4:1:1 in energy between bin k and its neighbours.
    const double peak = s.magnitudes.at(t, k) * s.magnitudes.at(t, k);
    EXPECT_NEAR(peak / total, 2.0 / 3.0, 1e-9);
    std::vector<double> frame(n);
    for (std::size_t i = 0; i < n; ++i) frame[i] = w.samples[t * 512 + i] * window[i];
    EXPECT_NEAR(s.magnitudes.at(t, k), std::abs(naive_dft_bin(frame, k)), 1e-9);
  }
}

TEST(Stft, DcBinEqualsWindowSum) {
  Waveform w;
  w.samples.assign(4096, 1.0);
  auto s = stft(w, 1024, 512);
  double wsum = 0.0;
  for (double v : hann_window(1024)) wsum += v;
  for (std::size_t t = 0; t < s.frames(); ++t) EXPECT_NEAR(s.magnitudes.at(t, 0), wsum, 1e-9);
}

TEST(Stft, ParsevalPerFrame) {
  auto w = random_signal(2048, 5);
  auto s = stft(w, 256, 128);
  const auto window = hann_window(256);
  for (std::size_t t = 0; t + 1 < s.frames(); ++t) {
    double time_e = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
      const double v = w.samples[t * 128 + i] * window[i];
      time_e += v * v;
    }
    double spec_e = 0.0;
    for (std::size_t f = 0; f < s.bins(); ++f) {
      const double m2 = s.magnitudes.at(t, f) * s.magnitudes.at(t, f);
      spec_e += (f == 0 || f + 1 == s.bins()) ? m2 : 2.0 * m2;
    }
    EXPECT_NEAR(spec_e / 256.0, time_e, 1e-9 * time_e);
  }
}

TEST(Stft, PhasesInHalfOpenInterval) {
  auto s = stft(random_signal(3000, 9), 256, 128);
  for (double p : s.phases.data()) {
    EXPECT_GT(p, -std::numbers::pi);
    EXPECT_LE(p, std::numbers::pi);
  }
}

TEST(Istft, RoundtripRandomSignals) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto w = random_signal(32000, seed);
    auto back = istft(stft(w, 1024, 512));
    ASSERT_EQ(back.size(), w.size());
    EXPECT_LT(interior_rel_error(back, w, 512), 1e-6);
  }
}

TEST(Istft, ZeroSpectrogramGivesSilence) {
  auto s = stft(random_signal(5000, 2), 256, 128);
  s.magnitudes = Tensor(s.magnitudes.shape());
  for (double v : istft(s).samples) EXPECT_EQ(v, 0.0);
}

TEST(Istft, LinearInComplexFrames) {
  auto s1 = stft(random_signal(6000, 3), 512, 256);
  auto s2 = stft(random_signal(6000, 4), 512, 256);
  auto c1 = to_complex(s1), c2 = to_complex(s2);
  const double a = 1.7, b = -0.4;
  std::vector<std::complex<double>> mix(c1.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * c1[i] + b * c2[i];
  auto y = istft(mix, s1.meta);
  auto y1 = istft(c1, s1.meta), y2 = istft(c2, s1.meta);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.samples[i], a * y1.samples[i] + b * y2.samples[i], 1e-10);
}

TEST(Istft, RejectsNonColaHop) {
  auto s = stft(random_signal(5000, 2), 256, 100);
  EXPECT_THROW(istft(s), mvn::ConfigError);
}

TEST(Recombine, IdentityZeroAndScaling) {
  auto w = random_signal(8000, 6);
  auto s = stft(w, 256, 128);
  auto same = recombine(s.magnitudes, s);
  EXPECT_LT(interior_rel_error(same, w, 128), 1e-6);

  auto silent = recombine(Tensor(s.magnitudes.shape()), s);
  for (double v : silent.samples) EXPECT_EQ(v, 0.0);

  Tensor twice = s.magnitudes;
  for (auto& v : twice.data()) v *= 2.0;
  auto doubled = recombine(twice, s);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(doubled.samples[i], 2.0 * same.samples[i], 1e-10);

  EXPECT_THROW(recombine(Tensor(mvn::numcore::Shape{3, 3}), s), mvn::DimensionError);
}

TEST(Recombine, TapeValueMatchesPlainPath) {
  auto s = stft(random_signal(3000, 8), 64, 32);
  mvn::numcore::Tape tape;
  auto y = recombine(tape.constant(s.magnitudes), s);
  EXPECT_EQ(y.value().storage(), recombine(s.magnitudes, s).samples);
}

TEST(Recombine, GradientMatchesFiniteDifferences) {
  auto phase_src = stft(random_signal(100, 12), 16, 8);
  mvn::numcore::GradCase gc{
      "recombine",
      [&](std::mt19937_64& r) {
        return std::vector{mvn::numcore::random_uniform(phase_src.magnitudes.shape(), r, 0.0, 2.0),
                           mvn::numcore::random_normal({100}, r)};
      },
      [&](mvn::numcore::Tape&, std::span<const mvn::numcore::Var> v) {
        return mvn::numcore::dot(recombine(v[0], phase_src), v[1]);
      },
      {1},
      20};
  auto report = check_gradients(gc);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Wav, RoundtripWithinQuantization) {
  auto path = std::filesystem::temp_directory_path() / "mvn_wav_roundtrip.wav";
  Waveform w;
  w.sample_rate = 16000;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-0.9, 0.9);
  for (int i = 0; i < 1000; ++i) w.samples.push_back(d(rng));
  write_wav(path, w);
  auto back = read_wav(path);
  EXPECT_EQ(back.sample_rate, 16000);
  ASSERT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 0.5 / 32768.0 + 1e-15);
  std::filesystem::remove(path);
}

TEST(Wav, RejectsGarbage) {
  auto path = std::filesystem::temp_directory_path() / "mvn_wav_garbage.wav";
  {
    std::ofstream f(path, std::ios::binary);
    f << "definitely not a wav file";
  }
  EXPECT_THROW(read_wav(path), mvn::FormatError);
  std::filesystem::remove(path);
}
