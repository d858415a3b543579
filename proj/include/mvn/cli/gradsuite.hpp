// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>
#include <vector>

#include "mvn/numcore/gradcheck.hpp"

namespace mvn::cli {

/// Every op name that records a backward rule on the tape.
const std::vector<std::string>& differentiable_ops();

/// Finite-difference cases: each primitive op, both cells, and every model
/// variant end to end through recombine and sdr_loss at toy size
/// (F=9, T=4, k=3, hidden=5).
std::vector<numcore::GradCase> gradient_suite();

/// Op names recorded when `gc` is built once.
std::set<std::string> ops_used(const numcore::GradCase& gc);

struct SuiteReport {
  std::vector<numcore::GradReport> cases;
  std::set<std::string> covered;
  /// Registered ops that no case exercised.
  std::vector<std::string> missing;
  double tolerance = 0.0;

  bool passed() const;
  std::vector<std::string> failures() const;
};

SuiteReport run_suite(const std::vector<numcore::GradCase>& cases, const numcore::GradCheckOptions& options = {});

/// Table of case, trials, checked entries, max relative error and status.
std::string format_report(const SuiteReport& report);

}  // namespace mvn::cli
