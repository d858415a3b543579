// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvn/models/models.hpp"
#include "mvn/scenegen/scenegen.hpp"

namespace mvn::experiments {

/// One curve point: mean and population std of SI-SDR over the validation pool.
struct SweepResult {
  std::string scenario;  ///< static_inc | static_dec | dynamic
  std::string model;
  std::size_t k = 0;
  double mean_sdr_db = 0.0;
  double std_sdr_db = 0.0;
  std::size_t n_scenes = 0;

  bool operator==(const SweepResult&) const = default;
};

/// Per-scene detail behind a SweepResult.
struct SceneScore {
  std::string scenario;
  std::string model;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> snrs_db;
  double sdr_db = 0.0;
};

struct NamedModel {
  std::string tag;
  models::Model* model = nullptr;
};

struct SweepSetup {
  /// Source kinds, duration, rate and geometry; scenario and k are set by the sweep.
  scenegen::SceneSpec scene;
  std::size_t frame_size = 1024;
  std::size_t hop = 512;
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 1;
};

/// The shared evaluation pool: `n` seeds derived from `seed`.
std::vector<std::uint64_t> eval_seeds(std::uint64_t seed, std::size_t n = 20);

/// Increasing and decreasing ladders for every k in [k_min, k_max].
std::vector<SweepResult> static_sweep(const std::vector<NamedModel>& models, const SweepSetup& setup,
                                      std::size_t k_min = 1, std::size_t k_max = 30,
                                      std::vector<SceneScore>* scores = nullptr);

/// Moving-noise scenes for every k in [k_min, k_max]; mic i is the same for every k.
std::vector<SweepResult> dynamic_sweep(const std::vector<NamedModel>& models, const SweepSetup& setup,
                                       std::size_t k_min = 1, std::size_t k_max = 15,
                                       std::vector<SceneScore>* scores = nullptr);

/// Sorts by (scenario, model, k).
void sort_results(std::vector<SweepResult>& rows);

/// Header `scenario,model,k,mean_sdr_db,std_sdr_db,n_scenes`, rows sorted,
/// doubles printed with round-trip precision.
std::string to_csv(std::vector<SweepResult> rows);
void emit_csv(const std::filesystem::path& path, const std::vector<SweepResult>& rows);
std::vector<SweepResult> parse_csv(const std::string& text);

void write_scores_json(const std::filesystem::path& path, const std::vector<SceneScore>& scores);

/// Rows of one (scenario, model) curve, ordered by k.
std::vector<SweepResult> curve(const std::vector<SweepResult>& rows, const std::string& scenario,
                               const std::string& model);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mvn::experiments
