// SPDX-License-Identifier: Apache-2.0
#include "mvn/cells/cells.hpp"

#include <Eigen/QR>
#include <cmath>
#include <random>

#include "mvn/errors.hpp"
#include "mvn/random.hpp"

namespace mvn::cells {

using namespace numcore;

Var Binder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto it = store_.find(name);
  if (it == store_.end()) throw ConfigError("unknown parameter '" + name + "'");
  Var v = tape_.parameter(it->second);
  bound_.emplace(name, v);
  return v;
}

Tensor glorot_uniform(std::size_t out, std::size_t in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w({out, in});
  for (auto& v : w.data()) v = dist(rng);
  return w;
}

Tensor orthogonal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = dist(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  Tensor out({n, n});
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = q(i, j);
  return out;
}

// DenseLayer

void DenseLayer::declare(ParamStore& store) const {
  store[name + ".W"] = Tensor({out, in});
  store[name + ".b"] = Tensor({out});
}

void DenseLayer::init(ParamStore& store, std::uint64_t seed) const {
  store[name + ".W"] = glorot_uniform(out, in, derive_seed(seed, name + ".W"));
  store[name + ".b"] = Tensor({out});
}

Var DenseLayer::forward(Binder& params, Var x) const {
  Var w = params(name + ".W");
  Var b = params(name + ".b");
  const auto& shape = x.value().shape();
  if (shape.empty() || shape.back() != in) {
    throw DimensionError("dense layer '" + name + "' expects width " + std::to_string(in) + ", got " +
                         shape_string(shape));
  }
  if (x.value().rank() == 1) {
    return activation(act, add(matmul(w, x), b));
  }
  return activation(act, add_bias(matmul_nt(x, w), b));
}

// RecurrentCell

RecurrentCell::RecurrentCell(std::string name, std::size_t in, std::size_t hidden)
    : name_(std::move(name)), in_(in), hidden_(hidden) {
  if (in == 0 || hidden == 0) throw ConfigError("cell '" + name_ + "' needs nonzero sizes");
}

void RecurrentCell::check_state(Var h_prev) const {
  const auto& s = h_prev.value().shape();
  if (s.size() != 1 || s[0] != hidden_) {
    throw DimensionError("cell '" + name_ + "' state must be [" + std::to_string(hidden_) + "], got " +
                         shape_string(s));
  }
}

Var RecurrentCell::step(Binder& params, Var x, Var h_prev) const {
  const auto& s = x.value().shape();
  if (s.size() != 1 || s[0] != in_) {
    throw DimensionError("cell '" + name_ + "' input must be [" + std::to_string(in_) + "], got " +
                         shape_string(s));
  }
  check_state(h_prev);
  return step(params, project(params, reshape(x, {1, in_})), 0, h_prev);
}

namespace {

Var project_rows(Binder& params, const std::string& w, const std::string& b, Var inputs) {
  return add_bias(matmul_nt(inputs, params(w)), params(b));
}

}  // namespace

// PlainRnnCell

PlainRnnCell::PlainRnnCell(std::string name, std::size_t in, std::size_t hidden, Activation act)
    : RecurrentCell(std::move(name), in, hidden), act_(act) {}

void PlainRnnCell::declare(ParamStore& store) const {
  store[param("W_h")] = Tensor({hidden_, in_});
  store[param("U_h")] = Tensor({hidden_, hidden_});
  store[param("b_h")] = Tensor({hidden_});
}

void PlainRnnCell::init(ParamStore& store, std::uint64_t seed) const {
  store[param("W_h")] = glorot_uniform(hidden_, in_, derive_seed(seed, param("W_h")));
  store[param("U_h")] = orthogonal(hidden_, derive_seed(seed, param("U_h")));
  store[param("b_h")] = Tensor({hidden_});
}

Projection PlainRnnCell::project(Binder& params, Var inputs) const {
  return {{project_rows(params, param("W_h"), param("b_h"), inputs)}};
}

Var PlainRnnCell::step(Binder& params, const Projection& proj, std::size_t index, Var h_prev) const {
  check_state(h_prev);
  return activation(act_, add(row(proj.parts.at(0), index), matmul(params(param("U_h")), h_prev)));
}

// GruCell

void GruCell::declare(ParamStore& store) const {
  for (const char* g : {"z", "r", "c"}) {
    store[param(std::string("W_") + g)] = Tensor({hidden_, in_});
    store[param(std::string("U_") + g)] = Tensor({hidden_, hidden_});
    store[param(std::string("b_") + g)] = Tensor({hidden_});
  }
}

void GruCell::init(ParamStore& store, std::uint64_t seed) const {
  for (const char* g : {"z", "r", "c"}) {
    const auto w = param(std::string("W_") + g), u = param(std::string("U_") + g);
    store[w] = glorot_uniform(hidden_, in_, derive_seed(seed, w));
    store[u] = orthogonal(hidden_, derive_seed(seed, u));
    store[param(std::string("b_") + g)] = Tensor({hidden_});
  }
}

Projection GruCell::project(Binder& params, Var inputs) const {
  Projection p;
  for (const char* g : {"z", "r", "c"}) {
    p.parts.push_back(project_rows(params, param(std::string("W_") + g), param(std::string("b_") + g), inputs));
  }
  return p;
}

Var GruCell::step(Binder& params, const Projection& proj, std::size_t index, Var h_prev) const {
  check_state(h_prev);
  Var z = sigmoid(add(row(proj.parts.at(0), index), matmul(params(param("U_z")), h_prev)));
  Var r = sigmoid(add(row(proj.parts.at(1), index), matmul(params(param("U_r")), h_prev)));
  Var c = tanh(add(row(proj.parts.at(2), index), matmul(params(param("U_c")), mul(r, h_prev))));
  Var keep = sub(params.tape().constant(Tensor::filled({hidden_}, 1.0)), z);
  return add(mul(keep, h_prev), mul(z, c));
}

std::unique_ptr<RecurrentCell> make_cell(std::string_view tag, std::string name, std::size_t in, std::size_t hidden) {
  if (tag == "gru") return std::make_unique<GruCell>(std::move(name), in, hidden);
  if (tag == "plain") return std::make_unique<PlainRnnCell>(std::move(name), in, hidden);
  throw ConfigError("unknown cell type '" + std::string(tag) + "' (expected gru or plain)");
}

}  // namespace mvn::cells
