// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mvn/numcore/ops.hpp"
#include "mvn/numcore/tape.hpp"

namespace mvn::cells {

using numcore::Activation;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

/// Named parameter collection. Ordered so checkpoints serialize deterministically.
using ParamStore = std::map<std::string, Tensor>;

/// Registers store entries on a tape the first time they are requested, so a
/// weight used at every step appears once on the tape.
class Binder {
 public:
  Binder(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  Var operator()(const std::string& name);
  /// Uses an existing tape value for `name` instead of the stored tensor.
  void bind(const std::string& name, Var v) { bound_.insert_or_assign(name, v); }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  ParamStore& store_;
  std::map<std::string, Var> bound_;
};

/// Glorot-uniform draw in ±sqrt(6 / (fan_in + fan_out)) for an out×in matrix.
Tensor glorot_uniform(std::size_t out, std::size_t in, std::uint64_t seed);
/// Square orthogonal matrix: Q of a QR factorization of a Gaussian draw, with
/// column signs fixed by diag(R).
Tensor orthogonal(std::size_t n, std::uint64_t seed);

/// y = act(x Wᵀ + b). W is out×in; x is [in] or [N×in].
struct DenseLayer {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::softplus;

  void declare(ParamStore& store) const;
  void init(ParamStore& store, std::uint64_t seed) const;
  Var forward(Binder& params, Var x) const;
};

/// Input-side products of a cell for a whole sequence, one row per step.
struct Projection {
  std::vector<Var> parts;
};

class RecurrentCell {
 public:
  RecurrentCell(std::string name, std::size_t in, std::size_t hidden);
  virtual ~RecurrentCell() = default;

  const std::string& name() const { return name_; }
  std::size_t input_size() const { return in_; }
  std::size_t hidden_size() const { return hidden_; }
  virtual std::string_view tag() const = 0;

  virtual void declare(ParamStore& store) const = 0;
  virtual void init(ParamStore& store, std::uint64_t seed) const = 0;

  /// W·x + b for every row of `inputs` [N×in].
  virtual Projection project(Binder& params, Var inputs) const = 0;
  /// Next hidden state from row `index` of a projection and the previous state.
  virtual Var step(Binder& params, const Projection& proj, std::size_t index, Var h_prev) const = 0;

  /// Single step from a raw input vector.
  Var step(Binder& params, Var x, Var h_prev) const;

 protected:
  std::string param(std::string_view suffix) const { return name_ + "." + std::string(suffix); }
  void check_state(Var h_prev) const;

  std::string name_;
  std::size_t in_;
  std::size_t hidden_;
};

/// h = act(W_h x + U_h h_prev + b).
class PlainRnnCell : public RecurrentCell {
 public:
  PlainRnnCell(std::string name, std::size_t in, std::size_t hidden, Activation act = Activation::tanh);

  std::string_view tag() const override { return "plain"; }
  void declare(ParamStore& store) const override;
  void init(ParamStore& store, std::uint64_t seed) const override;
  Projection project(Binder& params, Var inputs) const override;
  Var step(Binder& params, const Projection& proj, std::size_t index, Var h_prev) const override;

 private:
  Activation act_;
};

/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// c = tanh(W_c x + U_c (r⊙h) + b_c), h' = (1−z)⊙h + z⊙c.
class GruCell : public RecurrentCell {
 public:
  using RecurrentCell::RecurrentCell;

  std::string_view tag() const override { return "gru"; }
  void declare(ParamStore& store) const override;
  void init(ParamStore& store, std::uint64_t seed) const override;
  Projection project(Binder& params, Var inputs) const override;
  Var step(Binder& params, const Projection& proj, std::size_t index, Var h_prev) const override;
};

/// "gru" or "plain".
std::unique_ptr<RecurrentCell> make_cell(std::string_view tag, std::string name, std::size_t in, std::size_t hidden);

}  // namespace mvn::cells
