// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "mvn/errors.hpp"
#include "mvn/scenegen/scenegen.hpp"

using namespace mvn::scenegen;

namespace {

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// Naive DFT energy fraction at or below `cutoff_hz`.
double low_band_fraction(const Waveform& w, double cutoff_hz) {
  const std::size_t n = w.size();
  double low = 0.0, total = 0.0;
  for (std::size_t b = 0; b <= n / 2; ++b) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += w.samples[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(b * t % n) / n);
    }
    const double weight = (b == 0 || 2 * b == n) ? 1.0 : 2.0;
    const double e = weight * std::norm(acc);
    total += e;
    if (static_cast<double>(b) * w.sample_rate / n <= cutoff_hz) low += e;
  }
  return low / total;
}

Waveform constant(std::size_t n, double v) {
  Waveform w;
  w.samples.assign(n, v);
  return w;
}

}  // namespace

TEST(SynthSource, UnitRmsAndDeterministic) {
  for (auto kind : {SourceKind::tonal, SourceKind::chirp, SourceKind::noise_band}) {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
      auto a = synth_source(kind, 0.5, seed);
      auto b = synth_source(kind, 0.5, seed);
      ASSERT_EQ(a.size(), 8000u);
      EXPECT_NEAR(std::sqrt(energy(a.samples) / a.size()), 1.0, 1e-9);
      EXPECT_EQ(a.samples, b.samples);
      EXPECT_NE(a.samples, synth_source(kind, 0.5, seed + 1).samples);
    }
  }
  EXPECT_THROW(synth_source(SourceKind::tonal, 0.0, 1), mvn::InputError);
  EXPECT_THROW(parse_source_kind("speech"), mvn::ConfigError);
  EXPECT_EQ(parse_source_kind(to_string(SourceKind::chirp)), SourceKind::chirp);
}

TEST(SynthSource, TonalEnergyBelowFourKilohertz) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    EXPECT_GT(low_band_fraction(synth_source(SourceKind::tonal, 0.125, seed), 4000.0), 0.95) << seed;
  }
}

TEST(MixAtSnr, MeasuredSnrMatchesRequest) {
  auto clean = synth_source(SourceKind::tonal, 0.5, 3);
  auto noise = synth_source(SourceKind::noise_band, 0.5, 4);
  for (double snr : {0.0, 10.0, -5.0, 3.3}) {
    auto mix = mix_at_snr(clean, noise, snr);
    std::vector<double> n(mix.samples);
    for (std::size_t i = 0; i < n.size(); ++i) n[i] -= clean.samples[i];
    EXPECT_NEAR(10.0 * std::log10(energy(clean.samples) / energy(n)), snr, 1e-9) << snr;
  }
  EXPECT_THROW(mix_at_snr(clean, constant(clean.size(), 0.0), 0.0), mvn::InputError);
  EXPECT_THROW(mix_at_snr(constant(clean.size(), 0.0), noise, 0.0), mvn::InputError);
  EXPECT_THROW(mix_at_snr(clean, constant(10, 1.0), 0.0), mvn::DimensionError);
}

TEST(Ladder, QuotedEndpoints) {
  auto six = ladder_snrs(6, LadderOrder::increasing, 0);
  EXPECT_EQ(six.front(), -5.0);
  EXPECT_EQ(six.back(), -3.0);
  EXPECT_TRUE(std::is_sorted(six.begin(), six.end()));
  EXPECT_EQ(ladder_snrs(1, LadderOrder::increasing, 0), std::vector<double>{-5.0});
  EXPECT_EQ(ladder_snrs(1, LadderOrder::decreasing, 0), std::vector<double>{5.0});

  auto inc = ladder_snrs(30, LadderOrder::increasing, 0);
  auto dec = ladder_snrs(30, LadderOrder::decreasing, 0);
  EXPECT_EQ(inc.front(), -5.0);
  EXPECT_EQ(inc.back(), 5.0);
  EXPECT_EQ(dec.front(), 5.0);
  EXPECT_EQ(dec.back(), -5.0);
  std::sort(dec.begin(), dec.end());
  for (std::size_t i = 0; i < inc.size(); ++i) EXPECT_NEAR(inc[i], dec[i], 1e-12);
}

TEST(Ladder, LinearSpacingAndRandomOrder) {
  for (std::size_t k = 2; k <= kMaxLadderChannels; ++k) {
    auto s = ladder_snrs(k, LadderOrder::increasing, 0);
    const double step = (static_cast<double>(k) / 3.0) / static_cast<double>(k - 1);
    for (std::size_t i = 1; i < k; ++i) EXPECT_NEAR(s[i] - s[i - 1], step, 1e-12);
    auto r = ladder_snrs(k, LadderOrder::random, 17);
    EXPECT_EQ(r, ladder_snrs(k, LadderOrder::random, 17));
    std::sort(r.begin(), r.end());
    EXPECT_EQ(r, s);
  }
  EXPECT_THROW(ladder_snrs(0, LadderOrder::increasing, 0), mvn::InputError);
  EXPECT_THROW(ladder_snrs(31, LadderOrder::increasing, 0), mvn::InputError);
  EXPECT_THROW(parse_ladder_order("sideways"), mvn::ConfigError);
}

TEST(StaticLadder, ChannelsHitNominalSnr) {
  auto clean = synth_source(SourceKind::tonal, 0.25, 5);
  auto noise = synth_source(SourceKind::chirp, 0.25, 6);
  auto s = static_ladder(clean, noise, 7, LadderOrder::decreasing, 1);
  ASSERT_EQ(s.k(), 7u);
  EXPECT_EQ(s.scenario, "static_dec");
  for (std::size_t i = 0; i < s.k(); ++i) {
    EXPECT_NEAR(measure_snr_db(clean.samples, s.noise[i].samples), s.snrs_db[i], 1e-9);
    for (std::size_t t = 0; t < clean.size(); ++t) {
      EXPECT_EQ(s.channels[i].samples[t], clean.samples[t] + s.noise[i].samples[t]);
    }
  }
}

class DynamicScene : public ::testing::Test {
 protected:
  Waveform clean = synth_source(SourceKind::tonal, 2.0, 11);
  Waveform noise = synth_source(SourceKind::noise_band, 2.0, 12);
};

TEST_F(DynamicScene, MeanWholeClipSnrIsZero) {
  for (std::size_t k : {1u, 2u, 5u, 15u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto s = dynamic_scene(clean, noise, k, seed);
      double mean = 0.0;
      for (std::size_t i = 0; i < k; ++i) mean += measure_snr_db(clean.samples, s.noise[i].samples) / k;
      EXPECT_NEAR(mean, 0.0, 0.01) << k << " " << seed;
    }
  }
}

TEST_F(DynamicScene, InstantaneousSnrVaries) {
  auto s = dynamic_scene(clean, noise, 5, 4);
  const std::size_t win = 4000;
  for (std::size_t i = 0; i < s.k(); ++i) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t start = 0; start + win <= clean.size(); start += win) {
      double ec = 0.0, en = 0.0;
      for (std::size_t t = start; t < start + win; ++t) {
        ec += clean.samples[t] * clean.samples[t];
        en += s.noise[i].samples[t] * s.noise[i].samples[t];
      }
      const double snr = 10.0 * std::log10(ec / en);
      lo = std::min(lo, snr);
      hi = std::max(hi, snr);
    }
    EXPECT_GT(hi - lo, 0.0) << i;
  }
}

TEST_F(DynamicScene, GeometryOracle) {
  auto s = dynamic_scene(clean, noise, 6, 8);
  ASSERT_TRUE(s.geometry.has_value());
  const auto& g = *s.geometry;
  for (std::size_t i = 0; i < s.k(); ++i) {
    EXPECT_LT(std::hypot(g.mics[i][0], g.mics[i][1]), 0.9);
    auto gain = noise_gain_trajectory(g, i, clean.size());
    for (std::size_t t = 1; t < gain.size(); ++t) {
      EXPECT_LT(std::abs(gain[t] - gain[t - 1]) / gain[t - 1], 0.01);
    }
    // The noise component is the source times the gain trajectory, up to one global scale.
    const double scale = s.noise[i].samples[0] / (noise.samples[0] * gain[0]);
    for (std::size_t t = 0; t < gain.size(); t += 97) {
      EXPECT_NEAR(s.noise[i].samples[t], scale * gain[t] * noise.samples[t], 1e-12 * std::abs(scale) * gain[t] + 1e-15);
    }
    for (std::size_t t = 0; t < clean.size(); ++t) {
      EXPECT_EQ(s.channels[i].samples[t], clean.samples[t] + s.noise[i].samples[t]);
    }
  }
}

TEST_F(DynamicScene, MicsArePrefixStable) {
  auto small = dynamic_scene(clean, noise, 3, 21);
  auto large = dynamic_scene(clean, noise, 10, 21);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(small.geometry->mics[i], large.geometry->mics[i]);
  EXPECT_EQ(small.geometry->start_phase, large.geometry->start_phase);
  auto again = dynamic_scene(clean, noise, 3, 21);
  EXPECT_EQ(again.channels[2].samples, small.channels[2].samples);
}

TEST(MakeScene, DerivesSourcesFromSeed) {
  SceneSpec spec;
  spec.duration_s = 0.25;
  spec.k = 4;
  spec.scenario = Scenario::static_rand;
  auto a = make_scene(spec, 5), b = make_scene(spec, 5), c = make_scene(spec, 6);
  EXPECT_EQ(a.channels[3].samples, b.channels[3].samples);
  EXPECT_NE(a.clean.samples, c.clean.samples);
  spec.k = 0;
  EXPECT_THROW(make_scene(spec, 5), mvn::InputError);
  EXPECT_THROW(parse_scenario("moving"), mvn::ConfigError);
  EXPECT_EQ(parse_scenario("dynamic"), Scenario::dynamic);
}

TEST(SceneIo, Roundtrip) {
  SceneSpec spec;
  spec.duration_s = 0.25;
  spec.k = 3;
  auto scene = make_scene(spec, 9);
  auto dir = std::filesystem::temp_directory_path() / "mvn_test_scene_io";
  std::filesystem::remove_all(dir);
  write_scene(dir, scene);
  EXPECT_TRUE(std::filesystem::exists(dir / "meta.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "clean.wav"));
  auto back = read_scene(dir);
  EXPECT_EQ(back.scenario, scene.scenario);
  EXPECT_EQ(back.seed, scene.seed);
  EXPECT_EQ(back.snrs_db, scene.snrs_db);
  ASSERT_EQ(back.k(), scene.k());
  double peak = 0.0;
  for (const auto& c : scene.channels)
    for (double v : c.samples) peak = std::max(peak, std::abs(v));
  // 16-bit quantization after peak normalization.
  const double tol = peak / 0.9 / 32767.0;
  for (std::size_t i = 0; i < scene.k(); ++i) {
    for (std::size_t t = 0; t < scene.clean.size(); ++t) {
      ASSERT_NEAR(back.channels[i].samples[t], scene.channels[i].samples[t], tol);
    }
  }
  EXPECT_EQ(back.geometry->mics, scene.geometry->mics);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_scene(dir), mvn::IoError);
}
