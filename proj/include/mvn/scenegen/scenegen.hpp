// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvn/dsp/stft.hpp"

namespace mvn::scenegen {

using dsp::Waveform;

enum class SourceKind { tonal, chirp, noise_band };
std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view tag);

/// Seeded unit-RMS source. tonal: 3-6 harmonics of a 100-300 Hz fundamental
/// under a 2-6 Hz amplitude envelope. chirp: linear sweep. noise_band:
/// Gaussian noise band-limited by zeroing FFT bins.
Waveform synth_source(SourceKind kind, double duration_s, std::uint64_t seed, int sample_rate = 16000);

/// 10·log10(‖clean‖² / ‖noise‖²).
double measure_snr_db(std::span<const double> clean, std::span<const double> noise);
/// Gain g with measure_snr_db(clean, g·noise) == snr_db.
double gain_for_snr(const Waveform& clean, const Waveform& noise, double snr_db);
/// clean + g·noise at the requested SNR.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

enum class LadderOrder { increasing, decreasing, random };
std::string_view to_string(LadderOrder order);
LadderOrder parse_ladder_order(std::string_view tag);

inline constexpr std::size_t kMaxLadderChannels = 30;

/// Per-channel SNRs, linearly spaced: increasing −5 … −5+k/3, decreasing
/// 5 … 5−k/3, random the increasing set shuffled by `seed`.
std::vector<double> ladder_snrs(std::size_t k, LadderOrder order, std::uint64_t seed);

struct GeometryConfig {
  double mic_radius = 0.9;
  double noise_radius = 1.0;
  double revolutions = 1.0;
  double distance_floor = 0.1;
};

struct Geometry {
  std::vector<std::array<double, 2>> mics;
  double noise_radius = 1.0;
  double start_phase = 0.0;
  double revolutions = 1.0;
  double distance_floor = 0.1;
};

/// Noise gain at mic `i` for every sample: 1 / max(distance, floor).
std::vector<double> noise_gain_trajectory(const Geometry& g, std::size_t mic, std::size_t samples);

struct Scene {
  std::string scenario;  ///< static_inc | static_dec | static_rand | dynamic
  std::uint64_t seed = 0;
  Waveform clean;
  std::vector<Waveform> channels;
  /// Noise component of each channel; channels[i] == clean + noise[i].
  std::vector<Waveform> noise;
  /// Nominal SNR per channel (ladder) or measured whole-clip SNR (dynamic).
  std::vector<double> snrs_db;
  std::optional<Geometry> geometry;

  std::size_t k() const { return channels.size(); }
};

Scene static_ladder(const Waveform& clean, const Waveform& noise, std::size_t k, LadderOrder order,
                    std::uint64_t seed);

/// Stationary target at the origin, noise on a circle around mics placed
/// uniformly in a disk. Mic i depends only on (seed, i), so a k-mic scene is a
/// prefix of a larger one before SNR normalization. A global noise scale sets
/// the mean over channels of whole-clip SNR to 0 dB.
Scene dynamic_scene(const Waveform& clean, const Waveform& noise, std::size_t k, std::uint64_t seed,
                    const GeometryConfig& config = {});

enum class Scenario { static_inc, static_dec, static_rand, dynamic };
std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view tag);

struct SceneSpec {
  Scenario scenario = Scenario::dynamic;
  std::size_t k = 5;
  double duration_s = 2.0;
  int sample_rate = 16000;
  SourceKind target = SourceKind::tonal;
  SourceKind interferer = SourceKind::noise_band;
  GeometryConfig geometry;
};

/// Synthesizes target and interferer from `seed` and builds the scene.
Scene make_scene(const SceneSpec& spec, std::uint64_t seed);

/// One WAV per channel plus clean.wav and meta.json. Samples are scaled by a
/// per-scene factor that keeps the peak below full scale; meta.json records it.
void write_scene(const std::filesystem::path& dir, const Scene& scene);
Scene read_scene(const std::filesystem::path& dir);

}  // namespace mvn::scenegen
