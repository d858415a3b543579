// SPDX-License-Identifier: Apache-2.0
#include "mvn/scenegen/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

#include "mvn/dsp/fft.hpp"
#include "mvn/dsp/wav.hpp"
#include "mvn/errors.hpp"
#include "mvn/random.hpp"

namespace mvn::scenegen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

void normalize_rms(Waveform& w) {
  const double rms = std::sqrt(energy(w.samples) / static_cast<double>(w.size()));
  if (!(rms > 0.0)) throw InputError("generated source is silent");
  for (auto& v : w.samples) v /= rms;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Waveform tonal(std::size_t n, int sr, std::mt19937_64& rng) {
  const double f0 = uniform(rng, 100.0, 300.0);
  const int harmonics = std::uniform_int_distribution<int>(3, 6)(rng);
  std::vector<double> amp(harmonics), phase(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = uniform(rng, 0.3, 1.0) / (h + 1);
    phase[h] = uniform(rng, 0.0, kTwoPi);
  }
  const double am_rate = uniform(rng, 2.0, 6.0);
  const double am_phase = uniform(rng, 0.0, kTwoPi);
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double s = 0.0;
    for (int h = 0; h < harmonics; ++h) s += amp[h] * std::sin(kTwoPi * f0 * (h + 1) * t + phase[h]);
    w.samples[i] = s * (0.5 + 0.5 * std::sin(kTwoPi * am_rate * t + am_phase));
  }
  return w;
}

Waveform chirp(std::size_t n, int sr, std::mt19937_64& rng) {
  const double f0 = uniform(rng, 200.0, 1000.0);
  const double f1 = uniform(rng, 1500.0, 4000.0);
  const double phase = uniform(rng, 0.0, kTwoPi);
  const double duration = static_cast<double>(n) / sr;
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    w.samples[i] = std::sin(kTwoPi * (f0 * t + 0.5 * (f1 - f0) / duration * t * t) + phase);
  }
  return w;
}

Waveform noise_band(std::size_t n, int sr, std::mt19937_64& rng) {
  const double lo = uniform(rng, 100.0, 1000.0);
  const double hi = lo + uniform(rng, 1000.0, 4000.0);
  std::normal_distribution<double> gauss;
  std::vector<double> white(n);
  for (auto& v : white) v = gauss(rng);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  dsp::fft::rfft(white, spec);
  for (std::size_t b = 0; b < spec.size(); ++b) {
    const double f = static_cast<double>(b) * sr / static_cast<double>(n);
    if (f < lo || f > hi) spec[b] = 0.0;
  }
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  dsp::fft::irfft(spec, w.samples);
  return w;
}

void check_pair(const Waveform& clean, const Waveform& noise) {
  if (clean.size() != noise.size()) {
    throw DimensionError("clean and noise lengths differ: " + std::to_string(clean.size()) + " vs " +
                         std::to_string(noise.size()));
  }
  if (!(clean.energy() > 0.0)) throw InputError("clean signal has zero energy");
  if (!(noise.energy() > 0.0)) throw InputError("noise signal has zero energy");
}

Waveform scaled(const Waveform& w, double g) {
  Waveform out = w;
  for (auto& v : out.samples) v *= g;
  return out;
}

Waveform sum(const Waveform& a, const Waveform& b) {
  Waveform out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

std::string channel_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ch%02zu.wav", i + 1);
  return buf;
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::tonal: return "tonal";
    case SourceKind::chirp: return "chirp";
    case SourceKind::noise_band: return "noise_band";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view tag) {
  if (tag == "tonal") return SourceKind::tonal;
  if (tag == "chirp") return SourceKind::chirp;
  if (tag == "noise_band") return SourceKind::noise_band;
  throw ConfigError("unknown source kind '" + std::string(tag) + "'");
}

Waveform synth_source(SourceKind kind, double duration_s, std::uint64_t seed, int sample_rate) {
  if (!(duration_s > 0.0) || sample_rate <= 0) throw InputError("source duration and rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (n == 0) throw InputError("source shorter than one sample");
  std::mt19937_64 rng(seed);
  Waveform w;
  switch (kind) {
    case SourceKind::tonal: w = tonal(n, sample_rate, rng); break;
    case SourceKind::chirp: w = chirp(n, sample_rate, rng); break;
    case SourceKind::noise_band: w = noise_band(n, sample_rate, rng); break;
  }
  normalize_rms(w);
  return w;
}

double measure_snr_db(std::span<const double> clean, std::span<const double> noise) {
  return 10.0 * std::log10(energy(clean) / energy(noise));
}

double gain_for_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  check_pair(clean, noise);
  return std::sqrt(clean.energy() / (noise.energy() * std::pow(10.0, snr_db / 10.0)));
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  return sum(clean, scaled(noise, gain_for_snr(clean, noise, snr_db)));
}

std::string_view to_string(LadderOrder order) {
  switch (order) {
    case LadderOrder::increasing: return "increasing";
    case LadderOrder::decreasing: return "decreasing";
    case LadderOrder::random: return "random";
  }
  return "?";
}

LadderOrder parse_ladder_order(std::string_view tag) {
  if (tag == "increasing") return LadderOrder::increasing;
  if (tag == "decreasing") return LadderOrder::decreasing;
  if (tag == "random") return LadderOrder::random;
  throw ConfigError("unknown ladder order '" + std::string(tag) + "'");
}

std::vector<double> ladder_snrs(std::size_t k, LadderOrder order, std::uint64_t seed) {
  if (k < 1 || k > kMaxLadderChannels) {
    throw InputError("ladder channel count must be in [1, " + std::to_string(kMaxLadderChannels) + "], got " +
                     std::to_string(k));
  }
  const double span = static_cast<double>(k) / 3.0;
  const double start = order == LadderOrder::decreasing ? 5.0 : -5.0;
  const double end = order == LadderOrder::decreasing ? 5.0 - span : -5.0 + span;
  std::vector<double> snrs(k, start);
  for (std::size_t i = 1; i < k; ++i) {
    snrs[i] = i + 1 == k ? end : start + (end - start) * static_cast<double>(i) / static_cast<double>(k - 1);
  }
  if (order == LadderOrder::random) {
    std::mt19937_64 rng(derive_seed(seed, "ladder"));
    for (std::size_t i = k; i > 1; --i) std::swap(snrs[i - 1], snrs[rng() % i]);
  }
  return snrs;
}

Scene static_ladder(const Waveform& clean, const Waveform& noise, std::size_t k, LadderOrder order,
                    std::uint64_t seed) {
  check_pair(clean, noise);
  Scene s;
  s.scenario = order == LadderOrder::increasing   ? "static_inc"
               : order == LadderOrder::decreasing ? "static_dec"
                                                  : "static_rand";
  s.seed = seed;
  s.clean = clean;
  s.snrs_db = ladder_snrs(k, order, seed);
  for (double snr : s.snrs_db) {
    s.noise.push_back(scaled(noise, gain_for_snr(clean, noise, snr)));
    s.channels.push_back(sum(clean, s.noise.back()));
  }
  return s;
}

std::vector<double> noise_gain_trajectory(const Geometry& g, std::size_t mic, std::size_t samples) {
  const auto& m = g.mics.at(mic);
  std::vector<double> gain(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double angle = g.start_phase + kTwoPi * g.revolutions * static_cast<double>(i) / static_cast<double>(samples);
    const double dx = g.noise_radius * std::cos(angle) - m[0];
    const double dy = g.noise_radius * std::sin(angle) - m[1];
    gain[i] = 1.0 / std::max(std::hypot(dx, dy), g.distance_floor);
  }
  return gain;
}

Scene dynamic_scene(const Waveform& clean, const Waveform& noise, std::size_t k, std::uint64_t seed,
                    const GeometryConfig& config) {
  check_pair(clean, noise);
  if (k < 1) throw InputError("dynamic scene needs at least one channel");
  if (!(config.mic_radius > 0.0) || !(config.mic_radius < config.noise_radius)) {
    throw ConfigError("microphones must lie strictly inside the noise circle");
  }
  Geometry g;
  g.noise_radius = config.noise_radius;
  g.revolutions = config.revolutions;
  g.distance_floor = config.distance_floor;
  {
    std::mt19937_64 rng(derive_seed(seed, "noise_path"));
    g.start_phase = uniform(rng, 0.0, kTwoPi);
  }
  for (std::size_t i = 0; i < k; ++i) {
    std::mt19937_64 rng(derive_seed(derive_seed(seed, "mic"), i));
    const double r = config.mic_radius * std::sqrt(uniform(rng, 0.0, 1.0));
    const double a = uniform(rng, 0.0, kTwoPi);
    g.mics.push_back({r * std::cos(a), r * std::sin(a)});
  }

  Scene s;
  s.scenario = "dynamic";
  s.seed = seed;
  s.clean = clean;
  double mean_snr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    auto gain = noise_gain_trajectory(g, i, noise.size());
    Waveform part = noise;
    for (std::size_t t = 0; t < part.size(); ++t) part.samples[t] *= gain[t];
    mean_snr += measure_snr_db(clean.samples, part.samples) / static_cast<double>(k);
    s.noise.push_back(std::move(part));
  }
  // A common scale shifts every channel's SNR by the same number of dB.
  const double scale = std::pow(10.0, mean_snr / 20.0);
  for (auto& part : s.noise) {
    for (auto& v : part.samples) v *= scale;
    s.snrs_db.push_back(measure_snr_db(clean.samples, part.samples));
    s.channels.push_back(sum(clean, part));
  }
  s.geometry = std::move(g);
  return s;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::static_inc: return "static_inc";
    case Scenario::static_dec: return "static_dec";
    case Scenario::static_rand: return "static_rand";
    case Scenario::dynamic: return "dynamic";
  }
  return "?";
}

Scenario parse_scenario(std::string_view tag) {
  if (tag == "static_inc") return Scenario::static_inc;
  if (tag == "static_dec") return Scenario::static_dec;
  if (tag == "static_rand") return Scenario::static_rand;
  if (tag == "dynamic") return Scenario::dynamic;
  throw ConfigError("unknown scenario '" + std::string(tag) + "'");
}

Scene make_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.k < 1) throw InputError("scene needs at least one channel");
  const auto clean = synth_source(spec.target, spec.duration_s, derive_seed(seed, "target"), spec.sample_rate);
  const auto noise = synth_source(spec.interferer, spec.duration_s, derive_seed(seed, "interferer"), spec.sample_rate);
  switch (spec.scenario) {
    case Scenario::static_inc: return static_ladder(clean, noise, spec.k, LadderOrder::increasing, seed);
    case Scenario::static_dec: return static_ladder(clean, noise, spec.k, LadderOrder::decreasing, seed);
    case Scenario::static_rand: return static_ladder(clean, noise, spec.k, LadderOrder::random, seed);
    case Scenario::dynamic: return dynamic_scene(clean, noise, spec.k, seed, spec.geometry);
  }
  throw ConfigError("unknown scenario");
}

void write_scene(const std::filesystem::path& dir, const Scene& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  double peak = 0.0;
  for (double v : scene.clean.samples) peak = std::max(peak, std::abs(v));
  for (const auto& c : scene.channels)
    for (double v : c.samples) peak = std::max(peak, std::abs(v));
  const double export_scale = peak > 0.0 ? 0.9 / peak : 1.0;

  dsp::write_wav(dir / "clean.wav", scaled(scene.clean, export_scale));
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < scene.k(); ++i) {
    dsp::write_wav(dir / channel_file(i), scaled(scene.channels[i], export_scale));
    files.push_back(channel_file(i));
  }

  nlohmann::json meta{{"scenario", scene.scenario},
                      {"seed", scene.seed},
                      {"k", scene.k()},
                      {"sample_rate", scene.clean.sample_rate},
                      {"samples", scene.clean.size()},
                      {"export_scale", export_scale},
                      {"snrs_db", scene.snrs_db},
                      {"channels", files},
                      {"clean", "clean.wav"}};
  if (scene.geometry) {
    const auto& g = *scene.geometry;
    meta["geometry"] = {{"mic_positions", g.mics},
                        {"noise_radius", g.noise_radius},
                        {"start_phase", g.start_phase},
                        {"revolutions", g.revolutions},
                        {"distance_floor", g.distance_floor},
                        {"target_position", {0.0, 0.0}}};
  }
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

Scene read_scene(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot read " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
  try {
    Scene s;
    s.scenario = meta.at("scenario").get<std::string>();
    s.seed = meta.at("seed").get<std::uint64_t>();
    const double inv = 1.0 / meta.at("export_scale").get<double>();
    s.clean = scaled(dsp::read_wav(dir / meta.at("clean").get<std::string>()), inv);
    for (const auto& f : meta.at("channels")) {
      auto ch = scaled(dsp::read_wav(dir / f.get<std::string>()), inv);
      if (ch.size() != s.clean.size()) throw FormatError(dir.string() + ": channel length differs from clean");
      Waveform part = ch;
      for (std::size_t i = 0; i < part.size(); ++i) part.samples[i] -= s.clean.samples[i];
      s.noise.push_back(std::move(part));
      s.channels.push_back(std::move(ch));
    }
    if (s.channels.empty()) throw FormatError(dir.string() + ": scene has no channels");
    s.snrs_db = meta.at("snrs_db").get<std::vector<double>>();
    if (meta.contains("geometry")) {
      const auto& gj = meta["geometry"];
      Geometry g;
      g.mics = gj.at("mic_positions").get<std::vector<std::array<double, 2>>>();
      g.noise_radius = gj.at("noise_radius").get<double>();
      g.start_phase = gj.at("start_phase").get<double>();
      g.revolutions = gj.at("revolutions").get<double>();
      g.distance_floor = gj.at("distance_floor").get<double>();
      s.geometry = std::move(g);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
}

}  // namespace mvn::scenegen
