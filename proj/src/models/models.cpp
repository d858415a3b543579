// SPDX-License-Identifier: Apache-2.0
#include "mvn/models/models.hpp"

#include <algorithm>
#include <cmath>

#include "mvn/errors.hpp"

namespace mvn::models {

using namespace numcore;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::avg_rnn: return "avg_rnn";
    case Variant::mvn1d: return "mvn1d";
    case Variant::mvn2d: return "mvn2d";
  }
  return "?";
}

Variant parse_variant(std::string_view tag) {
  if (tag == "avg_rnn") return Variant::avg_rnn;
  if (tag == "mvn1d") return Variant::mvn1d;
  if (tag == "mvn2d") return Variant::mvn2d;
  throw ConfigError("unknown model variant '" + std::string(tag) + "' (expected avg_rnn, mvn1d or mvn2d)");
}

void ModelConfig::validate() const {
  if (input_bins == 0 || front_dim == 0 || hidden == 0) throw ConfigError("model sizes must be positive");
  if (cell != "gru" && cell != "plain") throw ConfigError("unknown cell type '" + cell + "'");
  if (bidirectional_channels && variant != Variant::mvn2d) {
    throw ConfigError("bidirectional_channels requires the mvn2d variant");
  }
  if (!(input_gain > 0.0) || !std::isfinite(input_gain)) throw ConfigError("input_gain must be positive");
}

Tensor stack_channels(const std::vector<Tensor>& channels) {
  if (channels.empty()) throw InputError("no channels to stack");
  const auto& first = channels.front().shape();
  if (first.size() != 2) throw DimensionError("channel spectra must be T×F, got " + shape_string(first));
  Tensor out({channels.size(), first[0], first[1]});
  auto dst = out.data().begin();
  for (const auto& c : channels) {
    if (c.shape() != first) {
      throw DimensionError("channel shape mismatch: " + shape_string(c.shape()) + " vs " + shape_string(first));
    }
    dst = std::copy(c.data().begin(), c.data().end(), dst);
  }
  return out;
}

Model::Model(ModelConfig config)
    : config_(std::move(config)),
      front_{"front", config_.input_bins, config_.front_dim, Activation::softplus},
      back_{"back", config_.hidden * (config_.bidirectional_channels ? 2 : 1), config_.input_bins,
            Activation::softplus} {
  config_.validate();
  cell_ = cells::make_cell(config_.cell, "cell", config_.front_dim, config_.hidden);
  if (config_.bidirectional_channels) {
    cell_rev_ = cells::make_cell(config_.cell, "cell_rev", config_.front_dim, config_.hidden);
  }
  front_.declare(params_);
  cell_->declare(params_);
  if (cell_rev_) cell_rev_->declare(params_);
  back_.declare(params_);
}

void Model::init(std::uint64_t seed) {
  front_.init(params_, seed);
  cell_->init(params_, seed);
  if (cell_rev_) cell_rev_->init(params_, seed);
  back_.init(params_, seed);
}

void Model::check_input(const Tensor& input) const {
  if (input.rank() != 3 || input.dim(2) != config_.input_bins) {
    throw DimensionError("model expects k×T×" + std::to_string(config_.input_bins) + " magnitudes, got " +
                         shape_string(input.shape()));
  }
}

Var Model::front(Binder& params, Var rows) const {
  if (config_.input_gain != 1.0) rows = scale(rows, config_.input_gain);
  return front_.forward(params, rows);
}

Var Model::back(Binder& params, std::vector<Var>& states) const {
  return back_.forward(params, stack_rows(states));
}

Var Model::forward(Binder& params, Var input) const {
  switch (config_.variant) {
    case Variant::avg_rnn: return forward_avg_rnn(params, input);
    case Variant::mvn1d: return forward_mvn1d(params, input);
    case Variant::mvn2d: return forward_mvn2d(params, input);
  }
  throw ConfigError("unknown variant");
}

Var Model::forward_time_rnn(Binder& params, Var frames) const {
  const auto& s = frames.value().shape();
  if (s.size() != 2 || s[1] != config_.input_bins) {
    throw DimensionError("time RNN expects T×" + std::to_string(config_.input_bins) + ", got " + shape_string(s));
  }
  auto proj = cell_->project(params, front(params, frames));
  Var h = params.tape().constant(Tensor({config_.hidden}));
  std::vector<Var> states;
  states.reserve(s[0]);
  for (std::size_t t = 0; t < s[0]; ++t) {
    h = cell_->step(params, proj, t, h);
    states.push_back(h);
  }
  return back(params, states);
}

Var Model::forward_avg_rnn(Binder& params, Var input) const {
  check_input(input.value());
  std::vector<Var> channels;
  for (std::size_t i = 0; i < input.value().dim(0); ++i) channels.push_back(row(input, i));
  return forward_time_rnn(params, mean_of(channels));
}

Var Model::forward_mvn1d(Binder& params, Var input) const {
  check_input(input.value());
  const std::size_t k = input.value().dim(0), frames = input.value().dim(1);
  auto proj = cell_->project(params, front(params, reshape(input, {k * frames, config_.input_bins})));
  const Var zero = params.tape().constant(Tensor({config_.hidden}));
  std::vector<Var> states;
  states.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    Var h = zero;
    for (std::size_t i = 0; i < k; ++i) h = cell_->step(params, proj, i * frames + t, h);
    states.push_back(h);
  }
  return back(params, states);
}

Var Model::forward_mvn2d(Binder& params, Var input) const {
  check_input(input.value());
  const std::size_t k = input.value().dim(0), frames = input.value().dim(1);
  Var x = front(params, reshape(input, {k * frames, config_.input_bins}));
  auto proj = cell_->project(params, x);
  cells::Projection proj_rev;
  if (cell_rev_) proj_rev = cell_rev_->project(params, x);

  const Var zero = params.tape().constant(Tensor({config_.hidden}));
  Var h = zero, h_rev = zero;
  std::vector<Var> states;
  states.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < k; ++i) h = cell_->step(params, proj, i * frames + t, h);
    if (cell_rev_) {
      for (std::size_t i = k; i-- > 0;) h_rev = cell_rev_->step(params, proj_rev, i * frames + t, h_rev);
      states.push_back(concat(h, h_rev));
    } else {
      states.push_back(h);
    }
  }
  return back(params, states);
}

Tensor Model::predict(const Tensor& input) {
  Tape tape;
  Binder binder(tape, params_);
  return forward(binder, tape.constant(input)).value();
}

}  // namespace mvn::models
