// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "mvn/numcore/tape.hpp"

namespace mvn::numcore {

enum class Activation { identity, softplus, sigmoid, tanh };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view tag);

/// Overflow-safe ln(1 + e^v).
double softplus_value(double v);
double sigmoid_value(double v);

// Products. Rank-1 right operands are treated as column vectors.
Var matmul(Var a, Var b);     ///< [m×n]·[n×p] or [m×n]·[n]
Var matmul_nt(Var a, Var b);  ///< a·bᵀ for [m×n], [p×n]
Var transpose(Var a);

enum class Elementwise { add, sub, mul };
Var elementwise(Elementwise tag, Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

/// Adds a length-n bias to every row of an [m×n] matrix. The only broadcast.
Var add_bias(Var a, Var bias);

Var activation(Activation tag, Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);

Var sum(Var a);       ///< scalar
Var dot(Var a, Var b);  ///< scalar; equal-size operands
Var reshape(Var a, Shape shape);
Var row(Var a, std::size_t index);  ///< slab along axis 0
Var stack_rows(std::span<const Var> rows);
Var concat(Var a, Var b);  ///< rank-1 concatenation
Var mean_of(std::span<const Var> parts);

namespace kernels {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace kernels

}  // namespace mvn::numcore
