// SPDX-License-Identifier: Apache-2.0
#include "mvn/numcore/ops.hpp"

#include <cmath>
#include <vector>

#include "mvn/errors.hpp"

namespace mvn::numcore {

namespace kernels {

// Four independent partial sums; the summation order depends only on n.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace kernels

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::softplus: return "softplus";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(std::string_view tag) {
  if (tag == "identity") return Activation::identity;
  if (tag == "softplus") return Activation::softplus;
  if (tag == "sigmoid") return Activation::sigmoid;
  if (tag == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(tag) + "'");
}

double softplus_value(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double sigmoid_value(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw UsageError("operands live on different tapes");
  return *a.tape();
}

[[noreturn]] void mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || (bv.rank() != 1 && bv.rank() != 2) || av.dim(1) != bv.dim(0)) {
    mismatch("matmul", av.shape(), bv.shape());
  }
  const std::size_t m = av.dim(0), n = av.dim(1);
  const bool vec = bv.rank() == 1;
  const std::size_t p = vec ? 1 : bv.dim(1);
  Tensor out(vec ? Shape{m} : Shape{m, p});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  if (vec) {
    for (std::size_t i = 0; i < m; ++i) C[i] = kernels::dot(A + i * n, B, n);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < n; ++k) kernels::axpy(A[i * n + k], B + k * p, C + i * p, p);
  }
  return tape.record("matmul", std::move(out), {a, b}, [a, b, m, n, p, vec](Tape& t, std::span<const double> g) {
    const double* A = t.value(a).data().data();
    const double* B = t.value(b).data().data();
    auto ga = t.grad_sink(a);
    auto gb = t.grad_sink(b);
    if (!ga.empty()) {
      for (std::size_t i = 0; i < m; ++i) {
        if (vec) {
          kernels::axpy(g[i], B, ga.data() + i * n, n);
        } else {
          for (std::size_t k = 0; k < n; ++k) ga[i * n + k] += kernels::dot(g.data() + i * p, B + k * p, p);
        }
      }
    }
    if (!gb.empty()) {
      for (std::size_t i = 0; i < m; ++i) {
        if (vec) {
          kernels::axpy(g[i], A + i * n, gb.data(), n);
        } else {
          for (std::size_t k = 0; k < n; ++k) kernels::axpy(A[i * n + k], g.data() + i * p, gb.data() + k * p, p);
        }
      }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool vec = av.rank() == 1;
  if ((av.rank() != 1 && av.rank() != 2) || bv.rank() != 2 || av.shape().back() != bv.dim(1)) {
    mismatch("matmul_nt", av.shape(), bv.shape());
  }
  const std::size_t m = vec ? 1 : av.dim(0), n = bv.dim(1), p = bv.dim(0);
  Tensor out(vec ? Shape{p} : Shape{m, p});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) C[i * p + j] = kernels::dot(A + i * n, B + j * n, n);
  return tape.record("matmul_nt", std::move(out), {a, b}, [a, b, m, n, p](Tape& t, std::span<const double> g) {
    const double* A = t.value(a).data().data();
    const double* B = t.value(b).data().data();
    auto ga = t.grad_sink(a);
    auto gb = t.grad_sink(b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        const double gij = g[i * p + j];
        if (gij == 0.0) continue;
        if (!ga.empty()) kernels::axpy(gij, B + j * n, ga.data() + i * n, n);
        if (!gb.empty()) kernels::axpy(gij, A + i * n, gb.data() + j * n, n);
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw DimensionError("transpose needs a matrix, got " + shape_string(av.shape()));
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return a.tape()->record("transpose", std::move(out), {a}, [a, r, c](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var elementwise(Elementwise tag, Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  static constexpr std::string_view names[] = {"add", "sub", "mul"};
  const auto name = names[static_cast<int>(tag)];
  if (av.shape() != bv.shape()) mismatch(name, av.shape(), bv.shape());
  Tensor out(av.shape());
  auto o = out.data();
  auto x = av.data();
  auto y = bv.data();
  switch (tag) {
    case Elementwise::add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
      break;
    case Elementwise::sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
      break;
    case Elementwise::mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
      break;
  }
  return tape.record(name, std::move(out), {a, b}, [a, b, tag](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    auto gb = t.grad_sink(b);
    switch (tag) {
      case Elementwise::add:
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
        break;
      case Elementwise::sub:
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
        break;
      case Elementwise::mul: {
        auto x = t.value(a).data();
        auto y = t.value(b).data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * x[i];
        break;
      }
    }
  });
}

Var add(Var a, Var b) { return elementwise(Elementwise::add, a, b); }
Var sub(Var a, Var b) { return elementwise(Elementwise::sub, a, b); }
Var mul(Var a, Var b) { return elementwise(Elementwise::mul, a, b); }

Var scale(Var a, double factor) {
  Tensor out(a.value().shape());
  auto x = a.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * x[i];
  return a.tape()->record("scale", std::move(out), {a}, [a, factor](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_bias(Var a, Var bias) {
  Tape& tape = same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || av.rank() < 1 || av.shape().back() != bv.dim(0)) mismatch("add_bias", av.shape(), bv.shape());
  const std::size_t n = bv.dim(0);
  const std::size_t rows = av.size() / n;
  Tensor out = av;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  return tape.record("add_bias", std::move(out), {a, bias}, [a, bias, rows, n](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    auto gb = t.grad_sink(bias);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    if (!gb.empty())
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
  });
}

Var activation(Activation tag, Var a) {
  if (tag == Activation::identity) return a;
  Tensor out(a.value().shape());
  auto x = a.value().data();
  auto o = out.data();
  switch (tag) {
    case Activation::softplus:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = softplus_value(x[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = sigmoid_value(x[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(x[i]);
      break;
    case Activation::identity:
      break;
  }
  return a.tape()->record(to_string(tag), std::move(out), {a}, [a, tag](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    if (ga.empty()) return;
    auto x = t.value(a).data();
    switch (tag) {
      case Activation::softplus:
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * sigmoid_value(x[i]);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < ga.size(); ++i) {
          const double s = sigmoid_value(x[i]);
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < ga.size(); ++i) {
          const double y = std::tanh(x[i]);
          ga[i] += g[i] * (1.0 - y * y);
        }
        break;
      case Activation::identity:
        break;
    }
  });
}

Var softplus(Var a) { return activation(Activation::softplus, a); }
Var sigmoid(Var a) { return activation(Activation::sigmoid, a); }
Var tanh(Var a) { return activation(Activation::tanh, a); }

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape()->record("sum", Tensor::scalar(s), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    for (auto& v : ga) v += g[0];
  });
}

Var dot(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.size() != bv.size()) mismatch("dot", av.shape(), bv.shape());
  const double s = kernels::dot(av.data().data(), bv.data().data(), av.size());
  return tape.record("dot", Tensor::scalar(s), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    auto gb = t.grad_sink(b);
    if (!ga.empty()) kernels::axpy(g[0], t.value(b).data().data(), ga.data(), ga.size());
    if (!gb.empty()) kernels::axpy(g[0], t.value(a).data().data(), gb.data(), gb.size());
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape()->record("reshape", std::move(out), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var row(Var a, std::size_t index) {
  const Tensor& av = a.value();
  if (av.rank() < 1 || index >= av.dim(0)) {
    throw DimensionError("row " + std::to_string(index) + " out of range for " + shape_string(av.shape()));
  }
  Shape sub(av.shape().begin() + 1, av.shape().end());
  auto src = av.row(index);
  Tensor out(sub, std::vector<double>(src.begin(), src.end()));
  const std::size_t stride = src.size();
  return a.tape()->record("row", std::move(out), {a}, [a, index, stride](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    double* dst = ga.data() + index * stride;
    for (std::size_t i = 0; i < stride; ++i) dst[i] += g[i];
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw InputError("stack_rows needs at least one row");
  const Shape inner = rows[0].shape();
  const std::size_t stride = rows[0].size();
  Shape shape{rows.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<double> data;
  data.reserve(rows.size() * stride);
  for (const auto& r : rows) {
    if (r.tape() != rows[0].tape()) throw UsageError("stack_rows: operands live on different tapes");
    if (r.shape() != inner) mismatch("stack_rows", inner, r.shape());
    auto d = r.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  std::vector<Var> inputs(rows.begin(), rows.end());
  Tape& tape = *rows[0].tape();
  return tape.record("stack_rows", Tensor(std::move(shape), std::move(data)), rows,
                     [inputs = std::move(inputs), stride](Tape& t, std::span<const double> g) {
                       for (std::size_t r = 0; r < inputs.size(); ++r) {
                         auto gr = t.grad_sink(inputs[r]);
                         for (std::size_t i = 0; i < gr.size(); ++i) gr[i] += g[r * stride + i];
                       }
                     });
}

Var concat(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 1 || bv.rank() != 1) mismatch("concat", av.shape(), bv.shape());
  std::vector<double> data(av.data().begin(), av.data().end());
  data.insert(data.end(), bv.data().begin(), bv.data().end());
  const std::size_t na = av.size();
  return tape.record("concat", Tensor::vector(std::move(data)), {a, b}, [a, b, na](Tape& t, std::span<const double> g) {
    auto ga = t.grad_sink(a);
    auto gb = t.grad_sink(b);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
  });
}

Var mean_of(std::span<const Var> parts) {
  if (parts.empty()) throw InputError("mean_of needs at least one operand");
  const Shape shape = parts[0].shape();
  Tensor out(shape);
  auto o = out.data();
  for (const auto& p : parts) {
    if (p.tape() != parts[0].tape()) throw UsageError("mean_of: operands live on different tapes");
    if (p.shape() != shape) mismatch("mean_of", shape, p.shape());
    auto d = p.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += d[i];
  }
  const double n = static_cast<double>(parts.size());
  for (auto& v : o) v /= n;
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record("mean_of", std::move(out), parts,
                                 [inputs = std::move(inputs), n](Tape& t, std::span<const double> g) {
                                   for (const auto& in : inputs) {
                                     auto gi = t.grad_sink(in);
                                     for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i] / n;
                                   }
                                 });
}

}  // namespace mvn::numcore
