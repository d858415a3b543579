// SPDX-License-Identifier: Apache-2.0
#include "mvn/numcore/tape.hpp"

#include <algorithm>

#include "mvn/errors.hpp"

namespace mvn::numcore {

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("value() on an unbound Var");
  return tape_->value(*this);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw UsageError("Var does not belong to this tape");
  return nodes_[v.id()];
}

Tape::Node& Tape::node(Var v) {
  if (v.tape() != this || v.id() >= nodes_.size()) throw UsageError("Var does not belong to this tape");
  return nodes_[v.id()];
}

Var Tape::constant(Tensor value) {
  auto& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.op = "constant";
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::leaf(Tensor value) {
  auto& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.op = "leaf";
  n.requires_grad = true;
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::parameter(Tensor& param) {
  auto& n = nodes_.emplace_back();
  n.external = &param;
  n.op = "parameter";
  n.requires_grad = true;
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || node(in).requires_grad;
  auto& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.op = op;
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const {
  const auto& n = node(v);
  return n.external ? *n.external : n.value;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

std::string_view Tape::op_name(Var v) const { return node(v).op; }

std::vector<std::string_view> Tape::op_names() const {
  std::vector<std::string_view> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.op);
  return out;
}

std::span<double> Tape::grad_sink(Var v) {
  auto& n = node(v);
  if (!n.requires_grad) return {};
  const std::size_t len = n.external ? n.external->size() : n.value.size();
  if (n.grad.size() != len) n.grad.assign(len, 0.0);
  return n.grad;
}

std::span<const double> Tape::grad(Var v) const { return node(v).grad; }

void Tape::backward(Var loss) {
  const auto& ln = node(loss);
  const std::size_t loss_size = ln.external ? ln.external->size() : ln.value.size();
  if (loss_size != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  auto seed = grad_sink(loss);
  if (seed.empty()) return;
  seed[0] = 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // The rule may allocate grads of earlier nodes; deque growth does not
    // happen here, so n.grad stays valid.
    n.backward(*this, n.grad);
  }

  for (auto& n : nodes_) {
    if (!n.external || n.grad.empty()) continue;
    auto dst = n.external->ensure_grad();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad[j];
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace mvn::numcore
