// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "mvn/numcore/tape.hpp"

namespace mvn::objectives {

/// Added to x⊤x so a silent output does not divide by zero.
inline constexpr double kSdrLossEpsilon = 1e-12;
/// si_sdr ceiling for estimates that are exact multiples of the reference.
inline constexpr double kSiSdrCeilingDb = 60.0;

/// −(x⊤y)² / (x⊤x + ε) as a scalar tape node; y is held constant.
numcore::Var sdr_loss(numcore::Var x, std::span<const double> y);
double sdr_loss_value(std::span<const double> x, std::span<const double> y);

/// Scale-invariant SDR in dB, clamped to ±kSiSdrCeilingDb.
double si_sdr(std::span<const double> estimate, std::span<const double> reference);

}  // namespace mvn::objectives
