// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvn/dsp/stft.hpp"
#include "mvn/models/models.hpp"
#include "mvn/scenegen/scenegen.hpp"

namespace mvn::trainer {

using models::Model;
using models::ModelConfig;
using models::ParamStore;
using nlohmann::json;
using numcore::Tensor;

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::size_t channels_k_train = 5;
  std::size_t early_stop_patience = 5;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Where training and validation scenes come from and how they are analyzed.
struct DataConfig {
  scenegen::SceneSpec scene;
  std::size_t train_scenes = 100;
  std::size_t val_scenes = 20;
  std::size_t frame_size = 1024;
  std::size_t hop = 512;

  void validate() const;
};

// Strict JSON mappings: unknown keys raise ConfigError naming the key.
json to_json(const ModelConfig& c);
json to_json(const TrainConfig& c);
json to_json(const scenegen::SceneSpec& s);
json to_json(const DataConfig& d);
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});
scenegen::SceneSpec scene_spec_from_json(const json& j, scenegen::SceneSpec base = {});
DataConfig data_config_from_json(const json& j, DataConfig base = {});

/// A scene ready for the network: k×T×F magnitudes, the last channel's
/// spectrogram for phase, and the clean target waveform.
struct Example {
  std::uint64_t seed = 0;
  Tensor input;
  dsp::Spectrogram phase_source;
  std::vector<double> clean;
};

Example prepare(const scenegen::Scene& scene, std::size_t frame_size, std::size_t hop);

/// Scene seeds of the two pools. Validation seeds do not depend on k.
std::vector<std::uint64_t> train_seeds(std::uint64_t seed, std::size_t n);
std::vector<std::uint64_t> val_seeds(std::uint64_t seed, std::size_t n);

/// Generates and prepares scenes for `seeds`, using up to `threads` workers.
std::vector<Example> make_examples(const scenegen::SceneSpec& spec, const std::vector<std::uint64_t>& seeds,
                                   std::size_t frame_size, std::size_t hop, std::size_t threads = 1);

/// sdr_loss of one example on a fresh tape, scaled by `weight`, with the
/// gradient accumulated into the parameters' grad buffers.
double accumulate_gradient(Model& model, const Example& ex, double weight);

/// Time-domain estimate for one example.
std::vector<double> enhance(Model& model, const Example& ex);
/// SI-SDR per example, computed concurrently against the current parameters.
std::vector<double> evaluate(Model& model, const std::vector<Example>& examples, std::size_t threads = 1);

double global_grad_norm(const ParamStore& params);
/// Rescales gradients so their global norm is at most `max_norm`. Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

class Adam {
 public:
  Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParamStore& params);

  double learning_rate() const { return lr_; }
  std::uint64_t steps() const { return t_; }
  const std::map<std::string, Tensor>& first_moment() const { return m_; }
  const std::map<std::string, Tensor>& second_moment() const { return v_; }
  void restore(std::uint64_t steps, std::map<std::string, Tensor> m, std::map<std::string, Tensor> v);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_sdr = 0.0;
};

/// Everything needed to resume a run or reload a model.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  TrainConfig train;
  ParamStore params;
  /// Parameters at the best validation epoch so far; empty when none was scored.
  ParamStore best_params;
  std::uint64_t adam_steps = 0;
  std::map<std::string, Tensor> adam_m, adam_v;
  std::string rng_state;
  std::size_t epoch = 0;
  double best_val_sdr = 0.0;
  std::size_t epochs_since_best = 0;
  std::vector<EpochRecord> history;
};

/// Binary layout: "MVNC", u32 version, u32-length JSON header, tensor
/// sections (u32 count; each: u32-length name, u32 rank, u64 extents,
/// doubles), trailing CRC32 of everything before it. Little-endian.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Rebuilds the model from `params`, checking names and shapes against the config.
Model model_from_checkpoint(const Checkpoint& ckpt);

class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  /// Resumes optimizer, RNG, epoch counter and history from a checkpoint of the same configuration.
  void restore(const Checkpoint& ckpt);
  Checkpoint checkpoint() const;

  /// One optimizer update on the mean loss of `batch`. Throws NumericError
  /// naming the scene seeds when the loss or gradient is not finite.
  double step(const std::vector<const Example*>& batch);

  /// Runs epochs until config.epochs or patience runs out, leaving the best
  /// parameters in the model. `on_epoch` sees each record and the state after it.
  std::vector<EpochRecord> fit(const std::vector<Example>& train, const std::vector<Example>& val,
                               std::size_t threads = 1,
                               const std::function<void(const EpochRecord&, const Trainer&)>& on_epoch = {});

  const std::vector<EpochRecord>& history() const { return history_; }
  std::size_t epoch() const { return epoch_; }
  double best_val_sdr() const { return best_val_sdr_; }
  double last_grad_norm() const { return last_grad_norm_; }

 private:
  Model& model_;
  TrainConfig config_;
  Adam adam_;
  std::mt19937_64 rng_;
  std::size_t epoch_ = 0;
  double best_val_sdr_ = -1e300;
  std::size_t since_best_ = 0;
  ParamStore best_params_;
  std::vector<EpochRecord> history_;
  double last_grad_norm_ = 0.0;
};

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace mvn::trainer
