// SPDX-License-Identifier: Apache-2.0
#include "mvn/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "mvn/cli/gradsuite.hpp"
#include "mvn/errors.hpp"
#include "mvn/random.hpp"

namespace mvn::cli {

namespace {

namespace fs = std::filesystem;

template <typename T>
void read_value(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "': " + j.at(key).dump());
  }
}

void read_count(const json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("'" + std::string(key) + "' must be a nonnegative integer");
  }
  out = v.get<std::size_t>();
}

void only_keys(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Creates `dir`, refusing a non-empty one unless `force`.
void prepare_output(const fs::path& dir, bool force) {
  if (dir.empty()) throw UsageError("--out is required");
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir, ec) && !force) {
      throw UsageError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    }
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string scene_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03zu", i);
  return buf;
}

std::vector<trainer::Example> load_scene_dir(const fs::path& dir, const RunConfig& cfg) {
  if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir.string());
  const auto manifest = read_json(dir / "manifest.json");
  std::vector<trainer::Example> out;
  try {
    for (const auto& entry : manifest.at("scenes")) {
      out.push_back(trainer::prepare(scenegen::read_scene(dir / entry.at("dir").get<std::string>()),
                                     cfg.data.frame_size, cfg.data.hop));
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  if (out.empty()) throw InputError("scene directory " + dir.string() + " lists no scenes");
  return out;
}

json seeds_json(const std::vector<std::uint64_t>& seeds) { return json(seeds); }

}  // namespace

void RunConfig::validate() const {
  if (threads == 0) throw ConfigError("threads must be positive");
  model.validate();
  train.validate();
  data.validate();
  if (model.input_bins != data.frame_size / 2 + 1) {
    throw ConfigError("model.input_bins is " + std::to_string(model.input_bins) + " but data.frame_size " +
                      std::to_string(data.frame_size) + " gives " + std::to_string(data.frame_size / 2 + 1) +
                      " bins");
  }
  if (gen.n_scenes == 0) throw ConfigError("gen.n_scenes must be positive");
  if (sweep.kind != "dynamic" && sweep.kind != "static") {
    throw ConfigError("sweep.kind must be 'dynamic' or 'static', got '" + sweep.kind + "'");
  }
  if (sweep.k_min < 1 || sweep.k_max < sweep.k_min) throw ConfigError("sweep k range is empty");
  if (sweep.kind == "static" && sweep.k_max > scenegen::kMaxLadderChannels) {
    throw ConfigError("static sweep supports k up to " + std::to_string(scenegen::kMaxLadderChannels));
  }
  if (sweep.n_scenes == 0) throw ConfigError("sweep.n_scenes must be positive");
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"threads", c.threads},
          {"model", trainer::to_json(c.model)},
          {"train", trainer::to_json(c.train)},
          {"data", trainer::to_json(c.data)},
          {"train_dir", c.train_dir},
          {"val_dir", c.val_dir},
          {"gen", {{"n_scenes", c.gen.n_scenes}}},
          {"sweep",
           {{"kind", c.sweep.kind},
            {"k_min", c.sweep.k_min},
            {"k_max", c.sweep.k_max},
            {"n_scenes", c.sweep.n_scenes},
            {"per_scene_json", c.sweep.per_scene_json}}}};
}

RunConfig run_config_from_json(const json& j) {
  only_keys(j, {"seed", "threads", "model", "train", "data", "train_dir", "val_dir", "gen", "sweep"}, "run config");
  RunConfig c;
  read_value(j, "seed", c.seed);
  read_count(j, "threads", c.threads);
  if (j.contains("model")) c.model = trainer::model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = trainer::train_config_from_json(j.at("train"));
  if (j.contains("data")) c.data = trainer::data_config_from_json(j.at("data"));
  read_value(j, "train_dir", c.train_dir);
  read_value(j, "val_dir", c.val_dir);
  if (j.contains("gen")) {
    only_keys(j.at("gen"), {"n_scenes"}, "gen config");
    read_count(j.at("gen"), "n_scenes", c.gen.n_scenes);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    only_keys(s, {"kind", "k_min", "k_max", "n_scenes", "per_scene_json"}, "sweep config");
    read_value(s, "kind", c.sweep.kind);
    read_count(s, "k_min", c.sweep.k_min);
    read_count(s, "k_max", c.sweep.k_max);
    read_count(s, "n_scenes", c.sweep.n_scenes);
    read_value(s, "per_scene_json", c.sweep.per_scene_json);
  }
  c.train.seed = c.seed;
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw UsageError("--set key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("--set key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets) {
  json j = to_json(RunConfig{});
  if (file) {
    const auto from_file = read_json(*file);
    only_keys(from_file, {"seed", "threads", "model", "train", "data", "train_dir", "val_dir", "gen", "sweep"},
              file->string());
    j.merge_patch(from_file);
  }
  for (const auto& s : sets) apply_override(j, s);
  return run_config_from_json(j);
}

std::uint64_t init_seed(const RunConfig& c) { return derive_seed(c.seed, "init"); }

json cmd_gen(const RunConfig& cfg, const CommonOptions& opts) {
  cfg.validate();
  prepare_output(opts.out, opts.force);
  const auto seeds = trainer::train_seeds(cfg.seed, cfg.gen.n_scenes);
  json scenes = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    scenegen::write_scene(opts.out / scene_dir_name(i), scenegen::make_scene(cfg.data.scene, seeds[i]));
    scenes.push_back({{"dir", scene_dir_name(i)}, {"seed", seeds[i]}});
  }
  const json manifest{{"tool_version", kToolVersion},
                      {"seed", cfg.seed},
                      {"scenario", scenegen::to_string(cfg.data.scene.scenario)},
                      {"k", cfg.data.scene.k},
                      {"scenes", scenes}};
  write_json(opts.out / "config.json", to_json(cfg));
  write_json(opts.out / "manifest.json", manifest);
  return manifest;
}

std::vector<trainer::EpochRecord> cmd_train(const RunConfig& cfg, const CommonOptions& opts,
                                            const std::optional<fs::path>& resume, std::ostream& log) {
  cfg.validate();
  std::optional<trainer::Checkpoint> start;
  if (resume) {
    start = trainer::load_checkpoint(*resume);
    if (!(start->model == cfg.model)) throw ConfigError("checkpoint model config differs from the run config");
    auto a = start->train, b = cfg.train;
    a.epochs = b.epochs;
    if (!(a == b)) throw ConfigError("checkpoint train config differs from the run config (other than epochs)");
  }
  prepare_output(opts.out, opts.force || resume.has_value());

  auto spec = cfg.data.scene;
  spec.k = cfg.train.channels_k_train;
  const auto tseeds = trainer::train_seeds(cfg.seed, cfg.data.train_scenes);
  const auto vseeds = trainer::val_seeds(cfg.seed, cfg.data.val_scenes);
  auto train = cfg.train_dir.empty()
                   ? trainer::make_examples(spec, tseeds, cfg.data.frame_size, cfg.data.hop, cfg.threads)
                   : load_scene_dir(cfg.train_dir, cfg);
  auto val = cfg.val_dir.empty() ? trainer::make_examples(spec, vseeds, cfg.data.frame_size, cfg.data.hop, cfg.threads)
                                 : load_scene_dir(cfg.val_dir, cfg);

  write_json(opts.out / "config.json", to_json(cfg));
  write_json(opts.out / "run.json", {{"tool_version", kToolVersion},
                                     {"command", "train"},
                                     {"seed", cfg.seed},
                                     {"init_seed", init_seed(cfg)},
                                     {"train_seeds", cfg.train_dir.empty() ? seeds_json(tseeds) : json(cfg.train_dir)},
                                     {"val_seeds", cfg.val_dir.empty() ? seeds_json(vseeds) : json(cfg.val_dir)},
                                     {"resumed_from", resume ? resume->string() : ""}});

  models::Model model(cfg.model);
  model.init(init_seed(cfg));
  trainer::Trainer t(model, cfg.train);
  if (start) t.restore(*start);
  auto history = t.fit(train, val, cfg.threads, [&](const trainer::EpochRecord& r, const trainer::Trainer& tr) {
    char line[128];
    std::snprintf(line, sizeof line, "epoch %zu  train_loss %.6g  val_sdr %.3f dB\n", r.epoch, r.train_loss,
                  r.val_sdr);
    log << line << std::flush;
    trainer::save_checkpoint(opts.out / "last.mvnc", tr.checkpoint());
    trainer::write_history_csv(opts.out / "history.csv", tr.history());
  });
  trainer::write_history_csv(opts.out / "history.csv", history);
  trainer::save_checkpoint(opts.out / "checkpoint.mvnc", t.checkpoint());
  return history;
}

CheckpointArg parse_checkpoint_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {"", arg};
  if (eq == 0 || eq + 1 == arg.size()) throw UsageError("--checkpoint expects tag=path or path, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::vector<experiments::SweepResult> cmd_sweep(const RunConfig& cfg, const CommonOptions& opts,
                                                const std::vector<CheckpointArg>& checkpoints, std::ostream& log) {
  cfg.validate();
  if (checkpoints.empty()) throw UsageError("sweep needs at least one --checkpoint");
  std::vector<models::Model> models;
  std::vector<std::string> tags;
  json sources = json::array();
  for (const auto& c : checkpoints) {
    auto ckpt = trainer::load_checkpoint(c.path);
    if (ckpt.model.input_bins != cfg.data.frame_size / 2 + 1) {
      throw ConfigError(c.path.string() + ": checkpoint input_bins " + std::to_string(ckpt.model.input_bins) +
                        " does not match data.frame_size " + std::to_string(cfg.data.frame_size));
    }
    tags.push_back(c.tag.empty() ? std::string(models::to_string(ckpt.model.variant)) : c.tag);
    if (std::find(tags.begin(), tags.end() - 1, tags.back()) != tags.end() - 1) {
      throw UsageError("duplicate model tag '" + tags.back() + "'; use tag=path");
    }
    models.push_back(trainer::model_from_checkpoint(ckpt));
    sources.push_back({{"tag", tags.back()}, {"path", c.path.string()}, {"epoch", ckpt.epoch}});
  }
  prepare_output(opts.out, opts.force);

  std::vector<experiments::NamedModel> named;
  for (std::size_t i = 0; i < models.size(); ++i) named.push_back({tags[i], &models[i]});
  experiments::SweepSetup setup;
  setup.scene = cfg.data.scene;
  setup.frame_size = cfg.data.frame_size;
  setup.hop = cfg.data.hop;
  setup.seeds = experiments::eval_seeds(cfg.seed, cfg.sweep.n_scenes);
  setup.threads = cfg.threads;
  std::vector<experiments::SceneScore> scores;
  auto* sink = cfg.sweep.per_scene_json ? &scores : nullptr;
  log << cfg.sweep.kind << " sweep over k=" << cfg.sweep.k_min << ".." << cfg.sweep.k_max << ", "
      << setup.seeds.size() << " scenes, " << named.size() << " model(s)\n";
  auto rows = cfg.sweep.kind == "static"
                  ? experiments::static_sweep(named, setup, cfg.sweep.k_min, cfg.sweep.k_max, sink)
                  : experiments::dynamic_sweep(named, setup, cfg.sweep.k_min, cfg.sweep.k_max, sink);
  experiments::emit_csv(opts.out / "results.csv", rows);
  write_json(opts.out / "config.json", to_json(cfg));
  write_json(opts.out / "run.json", {{"tool_version", kToolVersion},
                                     {"command", "sweep"},
                                     {"seed", cfg.seed},
                                     {"scene_seeds", setup.seeds},
                                     {"checkpoints", sources}});
  if (sink) experiments::write_scores_json(opts.out / "scores.json", scores);
  return rows;
}

bool cmd_gradcheck(std::ostream& out) {
  const auto report = run_suite(gradient_suite());
  out << format_report(report);
  out << (report.passed() ? "gradcheck: all cases passed\n" : "gradcheck: FAILED\n");
  return report.passed();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const UsageError*>(&e) ||
      dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) {
    return 2;
  }
  return 1;
}

}  // namespace mvn::cli
