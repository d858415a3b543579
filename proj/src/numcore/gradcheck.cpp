// SPDX-License-Identifier: Apache-2.0
#include "mvn/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mvn/errors.hpp"

namespace mvn::numcore {

Tensor random_normal(const Shape& shape, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor random_uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

namespace {

double evaluate(const GradCase& gc, const std::vector<Tensor>& inputs, const std::vector<bool>& is_const) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    vars.push_back(is_const[i] ? tape.constant(inputs[i]) : tape.leaf(inputs[i]));
  return gc.build(tape, vars).value().item();
}

}  // namespace

GradReport check_gradients(const GradCase& gc, const GradCheckOptions& options) {
  GradReport report;
  report.name = gc.name;
  report.trials = options.trials ? options.trials : gc.trials;
  std::mt19937_64 rng(options.seed);

  for (std::size_t trial = 0; trial < report.trials; ++trial) {
    std::vector<Tensor> inputs = gc.make_inputs(rng);
    std::vector<bool> is_const(inputs.size(), false);
    for (auto idx : gc.constant_inputs) is_const.at(idx) = true;

    Tape tape;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      vars.push_back(is_const[i] ? tape.constant(inputs[i]) : tape.leaf(inputs[i]));
    Var loss = gc.build(tape, vars);
    if (loss.size() != 1) throw UsageError(gc.name + ": gradient case must return a scalar");
    tape.backward(loss);

    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (is_const[i]) continue;
      std::vector<double> analytic(inputs[i].size(), 0.0);
      auto g = tape.grad(vars[i]);
      std::copy(g.begin(), g.end(), analytic.begin());
      double amax = 0.0;
      for (double a : analytic) amax = std::max(amax, std::abs(a));

      for (std::size_t j = 0; j < inputs[i].size(); ++j) {
        const double orig = inputs[i][j];
        inputs[i][j] = orig + options.epsilon;
        const double fp = evaluate(gc, inputs, is_const);
        inputs[i][j] = orig - options.epsilon;
        const double fm = evaluate(gc, inputs, is_const);
        inputs[i][j] = orig;
        const double numeric = (fp - fm) / (2.0 * options.epsilon);
        const double a = analytic[j];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3 * amax, 1e-10});
        const double rel = std::abs(a - numeric) / denom;
        if (!std::isfinite(rel)) {
          report.max_rel_error = std::numeric_limits<double>::infinity();
        } else {
          report.max_rel_error = std::max(report.max_rel_error, rel);
        }
        ++report.checked_entries;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace mvn::numcore
