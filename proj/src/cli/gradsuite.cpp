// SPDX-License-Identifier: Apache-2.0
#include "mvn/cli/gradsuite.hpp"

#include <cstdio>
#include <random>

#include "mvn/cells/cells.hpp"
#include "mvn/dsp/stft.hpp"
#include "mvn/models/models.hpp"
#include "mvn/numcore/ops.hpp"
#include "mvn/objectives/objectives.hpp"

namespace mvn::cli {

using numcore::GradCase;
using numcore::random_normal;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

namespace {

// Fixed random projection to a scalar so every output entry carries gradient.
Var project(Tape& t, Var v) {
  std::mt19937_64 rng(v.size() * 7919 + 1);
  return numcore::dot(v, t.constant(random_normal(v.shape(), rng)));
}

using Inputs = std::vector<Tensor>;

GradCase unary(std::string name, numcore::Shape shape, double spread, Var (*op)(Var)) {
  return {std::move(name), [=](std::mt19937_64& r) { return Inputs{random_normal(shape, r, spread)}; },
          [op](Tape& t, std::span<const Var> v) { return project(t, op(v[0])); }};
}

GradCase binary(std::string name, numcore::Shape a, numcore::Shape b, Var (*op)(Var, Var)) {
  return {std::move(name), [=](std::mt19937_64& r) { return Inputs{random_normal(a, r), random_normal(b, r)}; },
          [op](Tape& t, std::span<const Var> v) { return project(t, op(v[0], v[1])); }};
}

std::vector<GradCase> op_cases() {
  std::vector<GradCase> c;
  c.push_back(binary("matmul", {3, 4}, {4, 2}, numcore::matmul));
  c.push_back(binary("matvec", {3, 4}, {4}, numcore::matmul));
  c.push_back(binary("matmul_nt", {3, 4}, {5, 4}, numcore::matmul_nt));
  c.push_back(unary("transpose", {3, 4}, 1.0, numcore::transpose));
  c.push_back(binary("add", {6}, {6}, numcore::add));
  c.push_back(binary("sub", {6}, {6}, numcore::sub));
  c.push_back(binary("mul", {6}, {6}, numcore::mul));
  c.push_back({"scale", [](std::mt19937_64& r) { return Inputs{random_normal({6}, r)}; },
               [](Tape& t, std::span<const Var> v) { return project(t, numcore::scale(v[0], -1.7)); }});
  c.push_back(binary("add_bias", {3, 4}, {4}, numcore::add_bias));
  c.push_back(unary("softplus", {8}, 3.0, numcore::softplus));
  c.push_back(unary("sigmoid", {8}, 3.0, numcore::sigmoid));
  c.push_back(unary("tanh", {8}, 2.0, numcore::tanh));
  c.push_back({"sum", [](std::mt19937_64& r) { return Inputs{random_normal({7}, r)}; },
               [](Tape&, std::span<const Var> v) { return numcore::sum(numcore::mul(v[0], v[0])); }});
  c.push_back({"dot", [](std::mt19937_64& r) { return Inputs{random_normal({5}, r), random_normal({5}, r)}; },
               [](Tape&, std::span<const Var> v) { return numcore::dot(v[0], v[1]); }});
  c.push_back({"reshape_row_stack_concat",
               [](std::mt19937_64& r) { return Inputs{random_normal({3, 4}, r), random_normal({2}, r)}; },
               [](Tape& t, std::span<const Var> v) {
                 std::vector<Var> rows{numcore::row(v[0], 2), numcore::row(v[0], 0)};
                 return project(t, numcore::concat(numcore::reshape(numcore::stack_rows(rows), {8}), v[1]));
               }});
  c.push_back({"mean_of", [](std::mt19937_64& r) { return Inputs{random_normal({5}, r), random_normal({5}, r)}; },
               [](Tape& t, std::span<const Var> v) {
                 std::vector<Var> parts{v[0], v[1], v[0]};
                 return project(t, numcore::mul(numcore::mean_of(parts), v[1]));
               }});
  return c;
}

GradCase cell_case(const std::string& tag, std::size_t in, std::size_t hid) {
  auto proto = cells::make_cell(tag, "c", in, hid);
  cells::ParamStore shapes;
  proto->declare(shapes);
  std::vector<std::string> names;
  for (const auto& [name, t] : shapes) names.push_back(name);
  return {"cell " + tag,
          [=](std::mt19937_64& rng) {
            Inputs v;
            for (const auto& name : names) v.push_back(random_normal(shapes.at(name).shape(), rng, 0.7));
            v.push_back(random_normal({in}, rng));
            v.push_back(random_normal({hid}, rng, 0.5));
            v.push_back(random_normal({hid}, rng));
            return v;
          },
          [=](Tape& tape, std::span<const Var> v) {
            auto cell = cells::make_cell(tag, "c", in, hid);
            cells::ParamStore empty;
            cells::Binder b(tape, empty);
            for (std::size_t i = 0; i < names.size(); ++i) b.bind(names[i], v[i]);
            return numcore::dot(cell->step(b, v[names.size()], v[names.size() + 1]), v[names.size() + 2]);
          },
          {names.size() + 2},
          20};
}

GradCase model_case(models::Variant variant, bool bidirectional) {
  constexpr std::size_t k = 3, frame = 16, hop = 8, length = 40;
  models::ModelConfig cfg;
  cfg.input_bins = frame / 2 + 1;
  cfg.front_dim = 6;
  cfg.hidden = 5;
  cfg.variant = variant;
  cfg.bidirectional_channels = bidirectional;

  std::mt19937_64 sig(21);
  dsp::Waveform w;
  for (std::size_t i = 0; i < length; ++i) w.samples.push_back(std::normal_distribution<double>()(sig));
  const auto phase = dsp::stft(w, frame, hop);
  const auto target = random_normal({length}, sig).storage();

  models::Model proto(cfg);
  std::vector<std::string> names;
  std::vector<numcore::Shape> shapes;
  for (const auto& [name, t] : proto.params()) {
    names.push_back(name);
    shapes.push_back(t.shape());
  }
  return {"model " + std::string(models::to_string(variant)) + (bidirectional ? "+bidirectional" : ""),
          [=](std::mt19937_64& rng) {
            Inputs in;
            for (const auto& s : shapes) in.push_back(random_normal(s, rng, 0.5));
            in.push_back(numcore::random_uniform({k, phase.frames(), cfg.input_bins}, rng, 0.0, 1.5));
            return in;
          },
          [=](Tape& tape, std::span<const Var> in) {
            models::Model m(cfg);
            cells::Binder b(tape, m.params());
            for (std::size_t i = 0; i < names.size(); ++i) b.bind(names[i], in[i]);
            auto y = dsp::recombine(m.forward(b, in[names.size()]), phase);
            return objectives::sdr_loss(y, target);
          },
          {},
          5};
}

}  // namespace

const std::vector<std::string>& differentiable_ops() {
  static const std::vector<std::string> ops{"matmul",  "matmul_nt", "transpose", "add",       "sub",
                                            "mul",     "scale",     "add_bias",  "softplus",  "sigmoid",
                                            "tanh",    "sum",       "dot",       "reshape",   "row",
                                            "stack_rows", "concat", "mean_of",   "recombine", "sdr_loss"};
  return ops;
}

std::vector<GradCase> gradient_suite() {
  auto cases = op_cases();
  cases.push_back(cell_case("gru", 4, 5));
  cases.push_back(cell_case("plain", 4, 5));
  for (auto [v, bi] : {std::pair{models::Variant::avg_rnn, false}, {models::Variant::mvn1d, false},
                       {models::Variant::mvn2d, false}, {models::Variant::mvn2d, true}}) {
    cases.push_back(model_case(v, bi));
  }
  return cases;
}

std::set<std::string> ops_used(const GradCase& gc) {
  std::mt19937_64 rng(0);
  auto inputs = gc.make_inputs(rng);
  Tape tape;
  std::vector<Var> vars;
  for (auto& t : inputs) vars.push_back(tape.leaf(t));
  gc.build(tape, vars);
  std::set<std::string> out;
  for (auto op : tape.op_names()) out.emplace(op);
  return out;
}

bool SuiteReport::passed() const { return missing.empty() && failures().empty(); }

std::vector<std::string> SuiteReport::failures() const {
  std::vector<std::string> out;
  for (const auto& r : cases)
    if (!r.passed) out.push_back(r.name);
  return out;
}

SuiteReport run_suite(const std::vector<GradCase>& cases, const numcore::GradCheckOptions& options) {
  SuiteReport report;
  report.tolerance = options.tolerance;
  for (const auto& gc : cases) {
    report.cases.push_back(numcore::check_gradients(gc, options));
    report.covered.merge(ops_used(gc));
  }
  for (const auto& op : differentiable_ops())
    if (!report.covered.contains(op)) report.missing.push_back(op);
  return report;
}

std::string format_report(const SuiteReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %7s %9s %12s  %s\n", "case", "trials", "entries", "max_rel_err", "status");
  out += line;
  for (const auto& r : report.cases) {
    std::snprintf(line, sizeof line, "%-28s %7zu %9zu %12.3e  %s\n", r.name.c_str(), r.trials, r.checked_entries,
                  r.max_rel_error, r.passed ? "ok" : "FAIL");
    out += line;
  }
  std::size_t registered = differentiable_ops().size();
  std::snprintf(line, sizeof line, "coverage: %zu/%zu registered ops exercised\n", registered - report.missing.size(),
                registered);
  out += line;
  for (const auto& op : report.missing) out += "  not exercised: " + op + "\n";
  return out;
}

}  // namespace mvn::cli
