// SPDX-License-Identifier: Apache-2.0
#include "mvn/experiments/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mvn/errors.hpp"
#include "mvn/parallel.hpp"
#include "mvn/random.hpp"
#include "mvn/trainer/trainer.hpp"

namespace mvn::experiments {

namespace {

struct Prepared {
  std::vector<trainer::Example> examples;
  std::vector<std::vector<double>> snrs;
};

Prepared prepare_pool(const SweepSetup& setup, scenegen::Scenario scenario, std::size_t k) {
  auto spec = setup.scene;
  spec.scenario = scenario;
  spec.k = k;
  Prepared p;
  p.examples.resize(setup.seeds.size());
  p.snrs.resize(setup.seeds.size());
  parallel_for(setup.seeds.size(), setup.threads, [&](std::size_t i) {
    auto scene = scenegen::make_scene(spec, setup.seeds[i]);
    p.snrs[i] = scene.snrs_db;
    p.examples[i] = trainer::prepare(scene, setup.frame_size, setup.hop);
  });
  return p;
}

SweepResult summarize(const std::string& scenario, const std::string& model, std::size_t k,
                      const std::vector<double>& sdr) {
  const double n = static_cast<double>(sdr.size());
  const double mean = std::accumulate(sdr.begin(), sdr.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sdr) var += (v - mean) * (v - mean);
  return {scenario, model, k, mean, std::sqrt(var / n), sdr.size()};
}

void check_inputs(const std::vector<NamedModel>& models, const SweepSetup& setup, std::size_t k_min,
                  std::size_t k_max) {
  if (models.empty()) throw ConfigError("sweep needs at least one model");
  if (setup.seeds.empty()) throw ConfigError("sweep needs at least one scene seed");
  if (k_min < 1 || k_max < k_min) throw ConfigError("bad k range");
  const std::size_t bins = setup.frame_size / 2 + 1;
  for (const auto& m : models) {
    if (!m.model) throw ConfigError("model '" + m.tag + "' is null");
    if (m.model->config().input_bins != bins) {
      throw ConfigError("model '" + m.tag + "' has input_bins " + std::to_string(m.model->config().input_bins) +
                        " but frame_size " + std::to_string(setup.frame_size) + " gives " + std::to_string(bins));
    }
  }
}

void run(const std::vector<NamedModel>& models, const SweepSetup& setup, scenegen::Scenario scenario, std::size_t k,
         std::vector<SweepResult>& rows, std::vector<SceneScore>* scores) {
  const auto pool = prepare_pool(setup, scenario, k);
  const std::string tag(scenegen::to_string(scenario));
  for (const auto& m : models) {
    const auto sdr = trainer::evaluate(*m.model, pool.examples, setup.threads);
    rows.push_back(summarize(tag, m.tag, k, sdr));
    if (scores) {
      for (std::size_t i = 0; i < sdr.size(); ++i) {
        scores->push_back({tag, m.tag, k, setup.seeds[i], pool.snrs[i], sdr[i]});
      }
    }
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::vector<std::uint64_t> eval_seeds(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = derive_seed(derive_seed(seed, "eval"), i);
  return out;
}

std::vector<SweepResult> static_sweep(const std::vector<NamedModel>& models, const SweepSetup& setup,
                                      std::size_t k_min, std::size_t k_max, std::vector<SceneScore>* scores) {
  check_inputs(models, setup, k_min, k_max);
  if (k_max > scenegen::kMaxLadderChannels) {
    throw ConfigError("static sweep supports k up to " + std::to_string(scenegen::kMaxLadderChannels));
  }
  std::vector<SweepResult> rows;
  for (auto scenario : {scenegen::Scenario::static_inc, scenegen::Scenario::static_dec}) {
    for (std::size_t k = k_min; k <= k_max; ++k) run(models, setup, scenario, k, rows, scores);
  }
  sort_results(rows);
  return rows;
}

std::vector<SweepResult> dynamic_sweep(const std::vector<NamedModel>& models, const SweepSetup& setup,
                                       std::size_t k_min, std::size_t k_max, std::vector<SceneScore>* scores) {
  check_inputs(models, setup, k_min, k_max);
  std::vector<SweepResult> rows;
  for (std::size_t k = k_min; k <= k_max; ++k) run(models, setup, scenegen::Scenario::dynamic, k, rows, scores);
  sort_results(rows);
  return rows;
}

void sort_results(std::vector<SweepResult>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepResult& a, const SweepResult& b) {
    return std::tie(a.scenario, a.model, a.k) < std::tie(b.scenario, b.model, b.k);
  });
}

std::string to_csv(std::vector<SweepResult> rows) {
  sort_results(rows);
  std::string out = "scenario,model,k,mean_sdr_db,std_sdr_db,n_scenes\n";
  for (const auto& r : rows) {
    out += r.scenario + ',' + r.model + ',' + std::to_string(r.k) + ',' + fmt(r.mean_sdr_db) + ',' +
           fmt(r.std_sdr_db) + ',' + std::to_string(r.n_scenes) + '\n';
  }
  return out;
}

void emit_csv(const std::filesystem::path& path, const std::vector<SweepResult>& rows) {
  if (rows.empty()) throw InputError("no sweep results to write");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv(rows);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SweepResult> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "scenario,model,k,mean_sdr_db,std_sdr_db,n_scenes") {
    throw FormatError("sweep CSV has an unexpected header");
  }
  std::vector<SweepResult> rows;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() != 6) throw FormatError("sweep CSV line " + std::to_string(lineno) + " has " +
                                             std::to_string(cells.size()) + " fields");
    try {
      rows.push_back({cells[0], cells[1], std::stoul(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                      std::stoul(cells[5])});
    } catch (const std::logic_error&) {
      throw FormatError("sweep CSV line " + std::to_string(lineno) + " has a malformed number");
    }
  }
  return rows;
}

void write_scores_json(const std::filesystem::path& path, const std::vector<SceneScore>& scores) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scores) {
    arr.push_back({{"scenario", s.scenario},
                   {"model", s.model},
                   {"k", s.k},
                   {"seed", s.seed},
                   {"snrs_db", s.snrs_db},
                   {"sdr_db", s.sdr_db}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << arr.dump(1) << '\n';
}

std::vector<SweepResult> curve(const std::vector<SweepResult>& rows, const std::string& scenario,
                               const std::string& model) {
  std::vector<SweepResult> out;
  for (const auto& r : rows)
    if (r.scenario == scenario && r.model == model) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
  if (x.size() < 2) throw InputError("spearman needs at least two points");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mvn::experiments
