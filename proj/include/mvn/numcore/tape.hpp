// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>

#include "mvn/numcore/tensor.hpp"

namespace mvn::numcore {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive and has not been cleared.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Backward rule of one recorded op. Receives the gradient flowing into the
/// op's output and scatters it into its inputs through Tape::grad_sink.
using BackwardFn = std::function<void(Tape& tape, std::span<const double> out_grad)>;

/// Ordered record of executed ops for reverse-mode differentiation.
///
/// Values are kept in a deque so references handed out by value() stay valid
/// while more ops are recorded. A tape is confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(Tensor value);
  /// Differentiable input; its gradient is readable through grad() after backward().
  Var leaf(Tensor value);
  /// Differentiable input bound to an externally owned tensor. backward()
  /// accumulates into param.grad, so callers zero it between updates.
  Var parameter(Tensor& param);

  /// Appends an op. `backward` is dropped when no input requires a gradient.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op_name(Var v) const;
  /// Op name of every recorded node in order, inputs included.
  std::vector<std::string_view> op_names() const;

  /// Mutable gradient buffer of `v`, allocated on first use. Empty when `v`
  /// needs no gradient; backward rules skip such inputs.
  std::span<double> grad_sink(Var v);
  /// Gradient of `v` from the last backward(); empty if none reached it.
  std::span<const double> grad(Var v) const;

  /// Reverse sweep from a scalar loss. Intermediate gradients are reset on
  /// every call; parameter gradients accumulate across calls.
  void backward(Var loss);

  /// Drops every recorded op. Handles issued before become invalid.
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor* external = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    std::string_view op;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::deque<Node> nodes_;
};

}  // namespace mvn::numcore
