// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mvn/numcore/tape.hpp"

namespace mvn::numcore {

/// One differentiable computation to verify against central differences.
/// `make_inputs` draws a fresh random input set per trial; `build` records the
/// computation on the tape and returns a scalar.
struct GradCase {
  std::string name;
  std::function<std::vector<Tensor>(std::mt19937_64&)> make_inputs;
  std::function<Var(Tape&, std::span<const Var>)> build;
  /// Indices of inputs that are held constant; all others are checked.
  std::vector<std::size_t> constant_inputs;
  std::size_t trials = 50;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1234;
  /// Overrides GradCase::trials when nonzero.
  std::size_t trials = 0;
};

struct GradReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t trials = 0;
  std::size_t checked_entries = 0;
  bool passed = false;
};

/// Relative error used throughout: |a - n| / max(|a|, |n|, 1e-3 * max|a| over
/// the same input, 1e-10).
GradReport check_gradients(const GradCase& gc, const GradCheckOptions& options = {});

/// Standard normal tensor of the given shape.
Tensor random_normal(const Shape& shape, std::mt19937_64& rng, double scale = 1.0);
Tensor random_uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi);

}  // namespace mvn::numcore
