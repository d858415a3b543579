// SPDX-License-Identifier: Apache-2.0
#include "mvn/objectives/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mvn/errors.hpp"
#include "mvn/numcore/ops.hpp"

namespace mvn::objectives {

using numcore::Var;

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

double sdr_loss_value(std::span<const double> x, std::span<const double> y) {
  check_lengths(x.size(), y.size(), "sdr_loss");
  const double xy = numcore::kernels::dot(x.data(), y.data(), x.size());
  const double xx = numcore::kernels::dot(x.data(), x.data(), x.size());
  return -(xy * xy) / (xx + kSdrLossEpsilon);
}

Var sdr_loss(Var x, std::span<const double> y) {
  const auto xv = x.value().data();
  check_lengths(xv.size(), y.size(), "sdr_loss");
  const double loss = sdr_loss_value(xv, y);
  std::vector<double> target(y.begin(), y.end());
  return x.tape()->record("sdr_loss", numcore::Tensor::scalar(loss), {x},
                          [x, target = std::move(target)](numcore::Tape& t, std::span<const double> g) {
                            auto gx = t.grad_sink(x);
                            if (gx.empty()) return;
                            const auto xs = t.value(x).data();
                            const std::size_t n = xs.size();
                            const double xy = numcore::kernels::dot(xs.data(), target.data(), n);
                            const double d = numcore::kernels::dot(xs.data(), xs.data(), n) + kSdrLossEpsilon;
                            // d/dx of −(x·y)²/d: −2(x·y)/d · y + 2(x·y)²/d² · x
                            const double ay = -2.0 * xy / d * g[0];
                            const double ax = 2.0 * xy * xy / (d * d) * g[0];
                            numcore::kernels::axpy(ay, target.data(), gx.data(), n);
                            numcore::kernels::axpy(ax, xs.data(), gx.data(), n);
                          });
}

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  check_lengths(estimate.size(), reference.size(), "si_sdr");
  const std::size_t n = reference.size();
  const double rr = numcore::kernels::dot(reference.data(), reference.data(), n);
  if (!(rr > 0.0)) throw InputError("si_sdr: reference has zero energy");
  const double er = numcore::kernels::dot(estimate.data(), reference.data(), n);
  const double alpha = er / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = alpha * reference[i];
    const double e = estimate[i] - s;
    target += s * s;
    residual += e * e;
  }
  if (!(target > 0.0) && !(residual > 0.0)) throw InputError("si_sdr: estimate has zero energy");
  if (!(residual > 0.0)) return kSiSdrCeilingDb;
  if (!(target > 0.0)) return -kSiSdrCeilingDb;
  return std::min(kSiSdrCeilingDb, 10.0 * std::log10(target / residual));
}

}  // namespace mvn::objectives
