// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mvn/errors.hpp"
#include "mvn/numcore/gradcheck.hpp"
#include "mvn/objectives/objectives.hpp"

using namespace mvn::objectives;
using mvn::numcore::Tape;
using mvn::numcore::Tensor;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double loss_on_tape(const std::vector<double>& x, const std::vector<double>& y) {
  Tape tape;
  return sdr_loss(tape.constant(Tensor({x.size()}, x)), y).value().item();
}

}  // namespace

TEST(SdrLoss, Examples) {
  EXPECT_DOUBLE_EQ(loss_on_tape({1, 0}, {1, 0}), -1.0 / (1.0 + kSdrLossEpsilon));
  EXPECT_EQ(loss_on_tape({1, 0}, {0, 1}), 0.0);
  EXPECT_EQ(loss_on_tape({0, 0}, {0, 1}), 0.0);
  EXPECT_THROW(loss_on_tape({1, 0, 0}, {0, 1}), mvn::DimensionError);
}

TEST(SdrLoss, ScaleInvariantInEstimate) {
  auto x = randn(64, 1), y = randn(64, 2);
  const double base = sdr_loss_value(x, y);
  double xx = 0.0;
  for (double v : x) xx += v * v;
  for (double c : {2.0, -0.5, 3.7, -1e3, 1e-3}) {
    std::vector<double> cx(x);
    for (auto& v : cx) v *= c;
    // Beyond rounding, only the ε guard separates the two, by at most ε/(c²x⊤x) relative.
    const double bound = std::abs(base) * (2.0 * kSdrLossEpsilon / (c * c * xx) + 1e-13);
    EXPECT_NEAR(sdr_loss_value(cx, y), base, bound) << c;
  }
}

TEST(SdrLoss, BoundedByCauchySchwarz) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto x = randn(32, 100 + s), y = randn(32, 200 + s);
    double yy = 0.0;
    for (double v : y) yy += v * v;
    const double l = sdr_loss_value(x, y);
    EXPECT_LE(l, 0.0);
    EXPECT_GE(l, -yy * (1.0 + 1e-12));
  }
  auto y = randn(16, 3);
  double yy = 0.0;
  for (double v : y) yy += v * v;
  EXPECT_NEAR(sdr_loss_value(y, y), -yy, 1e-12 * yy);
}

TEST(SdrLoss, GradientMatchesFiniteDifferences) {
  for (std::size_t n : {2u, 3u, 17u, 64u}) {
    auto y = randn(n, n);
    mvn::numcore::GradCase gc{"sdr_loss",
                              [n](std::mt19937_64& r) { return std::vector{mvn::numcore::random_normal({n}, r)}; },
                              [y](Tape&, std::span<const mvn::numcore::Var> v) { return sdr_loss(v[0], y); },
                              {}};
    auto report = check_gradients(gc);
    EXPECT_TRUE(report.passed) << n << " " << report.max_rel_error;
  }
}

TEST(SiSdr, Examples) {
  auto r = randn(1000, 4);
  EXPECT_EQ(si_sdr(r, r), kSiSdrCeilingDb);
  std::vector<double> thrice(r);
  for (auto& v : thrice) v *= 3.0;
  EXPECT_EQ(si_sdr(thrice, r), kSiSdrCeilingDb);

  // Orthogonalize noise against r and match its energy.
  auto n = randn(1000, 5);
  double rn = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) rn += r[i] * n[i], rr += r[i] * r[i];
  double nn = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    n[i] -= rn / rr * r[i];
    nn += n[i] * n[i];
  }
  std::vector<double> est(r);
  for (std::size_t i = 0; i < r.size(); ++i) est[i] += n[i] * std::sqrt(rr / nn);
  EXPECT_NEAR(si_sdr(est, r), 0.0, 1e-9);
}

TEST(SiSdr, ScaleInvariance) {
  auto r = randn(500, 6), e = randn(500, 7);
  for (std::size_t i = 0; i < r.size(); ++i) e[i] += r[i];
  const double base = si_sdr(e, r);
  for (double c : {2.0, -4.0, 0.5, -1.0}) {
    std::vector<double> ce(e);
    for (auto& v : ce) v *= c;
    EXPECT_EQ(si_sdr(ce, r), base) << c;
  }
  for (double c : {3.3, -0.07}) {
    std::vector<double> ce(e);
    for (auto& v : ce) v *= c;
    EXPECT_NEAR(si_sdr(ce, r), base, 1e-10) << c;
  }
}

TEST(SiSdr, Errors) {
  std::vector<double> zero(10, 0.0);
  auto r = randn(10, 8);
  EXPECT_THROW(si_sdr(r, zero), mvn::InputError);
  EXPECT_THROW(si_sdr(zero, r), mvn::InputError);
  EXPECT_THROW(si_sdr(randn(9, 1), r), mvn::DimensionError);
}
