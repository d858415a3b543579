// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvn/experiments/experiments.hpp"
#include "mvn/trainer/trainer.hpp"

namespace mvn::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

struct GenConfig {
  std::size_t n_scenes = 5;
};

struct SweepConfig {
  std::string kind = "dynamic";  ///< dynamic | static
  std::size_t k_min = 1;
  std::size_t k_max = 15;
  std::size_t n_scenes = 20;
  bool per_scene_json = false;
};

/// Everything a run needs. The top-level seed drives model init, scene
/// pools and shuffling; train.seed always mirrors it.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  models::ModelConfig model;
  trainer::TrainConfig train;
  trainer::DataConfig data;
  /// Optional scene directories written by `gen`; empty means generate on the fly.
  std::string train_dir;
  std::string val_dir;
  GenConfig gen;
  SweepConfig sweep;

  void validate() const;
};

json to_json(const RunConfig& c);
/// Strict: unknown keys at any level raise ConfigError.
RunConfig run_config_from_json(const json& j);

/// Sets a dotted key such as `train.epochs=3`. The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(json& j, const std::string& assignment);

/// Defaults, then the file (if any), then overrides.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& sets);

/// Seeds for model initialization.
std::uint64_t init_seed(const RunConfig& c);

struct CommonOptions {
  std::filesystem::path out;
  bool force = false;
};

/// Writes n scenes, config.json and manifest.json. Returns the manifest.
json cmd_gen(const RunConfig& cfg, const CommonOptions& opts);

/// Trains one model; writes config.json, run.json, history.csv, checkpoint.mvnc
/// (best parameters) and last.mvnc (resumable state after every epoch).
std::vector<trainer::EpochRecord> cmd_train(const RunConfig& cfg, const CommonOptions& opts,
                                            const std::optional<std::filesystem::path>& resume, std::ostream& log);

/// `tag=path` or a bare path, tagged with the checkpoint's variant.
struct CheckpointArg {
  std::string tag;
  std::filesystem::path path;
};
CheckpointArg parse_checkpoint_arg(const std::string& arg);

/// Writes results.csv, run.json and optionally scores.json.
std::vector<experiments::SweepResult> cmd_sweep(const RunConfig& cfg, const CommonOptions& opts,
                                                const std::vector<CheckpointArg>& checkpoints, std::ostream& log);

/// Runs the finite-difference suite and prints its table. True when all pass.
bool cmd_gradcheck(std::ostream& out);

/// 2 for usage, configuration and input problems, 1 for everything else.
int exit_code_for(const std::exception& e);

}  // namespace mvn::cli
