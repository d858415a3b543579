// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mvn/cells/cells.hpp"

namespace mvn::models {

using cells::Binder;
using cells::ParamStore;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

enum class Variant { avg_rnn, mvn1d, mvn2d };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view tag);

struct ModelConfig {
  std::size_t input_bins = 513;
  std::size_t front_dim = 512;
  std::size_t hidden = 512;
  std::string cell = "gru";
  Variant variant = Variant::mvn2d;
  /// Adds a second cell that walks the channels in reverse (mvn2d only).
  bool bidirectional_channels = false;
  /// Constant factor applied to input magnitudes before the front layer.
  double input_gain = 1.0;

  /// Throws ConfigError on nonpositive sizes, unknown cells or a bidirectional non-2D model.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Stacks per-channel T×F magnitude matrices into a k×T×F tensor.
Tensor stack_channels(const std::vector<Tensor>& channels);

/// A configured network with its parameters.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void init(std::uint64_t seed);

  /// Dispatches on the variant. `input` is k×T×F; returns T×F.
  Var forward(Binder& params, Var input) const;
  Var forward_avg_rnn(Binder& params, Var input) const;
  Var forward_mvn1d(Binder& params, Var input) const;
  Var forward_mvn2d(Binder& params, Var input) const;
  /// Single-channel path: front layer, cell unrolled over time, back layer. T×F in and out.
  Var forward_time_rnn(Binder& params, Var frames) const;

  /// Forward on a fresh tape with the stored parameters.
  Tensor predict(const Tensor& input);

 private:
  void check_input(const Tensor& input) const;
  Var front(Binder& params, Var rows) const;
  Var back(Binder& params, std::vector<Var>& states) const;

  ModelConfig config_;
  cells::DenseLayer front_;
  cells::DenseLayer back_;
  std::unique_ptr<cells::RecurrentCell> cell_;
  std::unique_ptr<cells::RecurrentCell> cell_rev_;
  ParamStore params_;
};

}  // namespace mvn::models
