// SPDX-License-Identifier: Apache-2.0
#include "mvn/trainer/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <zlib.h>

#include "mvn/errors.hpp"
#include "mvn/numcore/ops.hpp"
#include "mvn/objectives/objectives.hpp"
#include "mvn/parallel.hpp"
#include "mvn/random.hpp"

namespace mvn::trainer {

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + std::string(where) + ": " + j.at(key).dump());
  }
}

// Size fields must be nonnegative integers; json happily converts -1 to a huge size_t.
void read_size(const json& j, const char* key, std::size_t& out, std::string_view where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("'" + std::string(key) + "' in " + std::string(where) + " must be a nonnegative integer");
  }
  out = v.get<std::size_t>();
}

std::string seed_list(const std::vector<const Example*>& batch) {
  std::string s;
  for (const auto* ex : batch) s += (s.empty() ? "" : ", ") + std::to_string(ex->seed);
  return s;
}

ParamStore snapshot(const ParamStore& params) {
  ParamStore out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape(), t.storage()));
  return out;
}

// Little-endian byte stream.
class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size, std::string path) : p_(data), end_(data + size), path_(std::move(path)) {}

  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(get(4, field)); }
  std::uint64_t u64(const char* field) { return get(8, field); }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
  std::string str(const char* field) {
    const auto n = u32(field);
    need(n, field);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n, const char* field) {
    if (static_cast<std::size_t>(end_ - p_) < n) throw FormatError(path_ + ": truncated while reading " + field);
  }
  std::uint64_t get(int n, const char* field) {
    need(n, field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
    p_ += n;
    return v;
  }
  const unsigned char* p_;
  const unsigned char* end_;
  std::string path_;
};

void write_tensors(Writer& w, std::string_view prefix, const std::map<std::string, Tensor>& tensors,
                   std::uint32_t& count) {
  for (const auto& [name, t] : tensors) {
    w.str(std::string(prefix) + name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
    ++count;
  }
}

void check_against(const ParamStore& expected, const ParamStore& got, std::string_view what) {
  for (const auto& [name, t] : expected) {
    auto it = got.find(name);
    if (it == got.end()) throw ConfigError("checkpoint " + std::string(what) + " missing parameter '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw ConfigError("checkpoint " + std::string(what) + " parameter '" + name + "' has shape " +
                        numcore::shape_string(it->second.shape()) + ", model expects " +
                        numcore::shape_string(t.shape()));
    }
  }
  for (const auto& [name, _] : got) {
    if (!expected.contains(name)) {
      throw ConfigError("checkpoint " + std::string(what) + " has unexpected parameter '" + name + "'");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (optimizer != "adam") throw ConfigError("unknown optimizer '" + optimizer + "'");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be positive");
  if (channels_k_train == 0) throw ConfigError("channels_k_train must be positive");
  if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
}

void DataConfig::validate() const {
  if (scene.k == 0) throw ConfigError("scene k must be positive");
  if (scene.scenario != scenegen::Scenario::dynamic && scene.k > scenegen::kMaxLadderChannels) {
    throw ConfigError("static scenes support at most " + std::to_string(scenegen::kMaxLadderChannels) + " channels");
  }
  if (!(scene.duration_s > 0.0)) throw ConfigError("duration_s must be positive");
  if (scene.sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (train_scenes == 0) throw ConfigError("train_scenes must be positive");
  if (val_scenes == 0) throw ConfigError("val_scenes must be positive");
  dsp::SpectrogramMeta meta;
  meta.frame_size = frame_size;
  meta.hop = hop;
  dsp::require_cola(meta);
}

json to_json(const ModelConfig& c) {
  return {{"input_bins", c.input_bins},
          {"front_dim", c.front_dim},
          {"hidden", c.hidden},
          {"cell", c.cell},
          {"variant", models::to_string(c.variant)},
          {"bidirectional_channels", c.bidirectional_channels},
          {"input_gain", c.input_gain}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  constexpr std::string_view where = "model config";
  reject_unknown(j, {"input_bins", "front_dim", "hidden", "cell", "variant", "bidirectional_channels", "input_gain"},
                 where);
  read_size(j, "input_bins", c.input_bins, where);
  read_size(j, "front_dim", c.front_dim, where);
  read_size(j, "hidden", c.hidden, where);
  read_field(j, "cell", c.cell, where);
  if (j.contains("variant")) {
    std::string v;
    read_field(j, "variant", v, where);
    c.variant = models::parse_variant(v);
  }
  read_field(j, "bidirectional_channels", c.bidirectional_channels, where);
  read_field(j, "input_gain", c.input_gain, where);
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer},
          {"grad_clip_norm", c.grad_clip_norm},
          {"seed", c.seed},
          {"channels_k_train", c.channels_k_train},
          {"early_stop_patience", c.early_stop_patience}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  constexpr std::string_view where = "train config";
  reject_unknown(j,
                 {"epochs", "batch_size", "learning_rate", "optimizer", "grad_clip_norm", "seed", "channels_k_train",
                  "early_stop_patience"},
                 where);
  read_size(j, "epochs", c.epochs, where);
  read_size(j, "batch_size", c.batch_size, where);
  read_field(j, "learning_rate", c.learning_rate, where);
  read_field(j, "optimizer", c.optimizer, where);
  read_field(j, "grad_clip_norm", c.grad_clip_norm, where);
  read_field(j, "seed", c.seed, where);
  read_size(j, "channels_k_train", c.channels_k_train, where);
  read_size(j, "early_stop_patience", c.early_stop_patience, where);
  return c;
}

json to_json(const scenegen::SceneSpec& s) {
  return {{"scenario", scenegen::to_string(s.scenario)},
          {"k", s.k},
          {"duration_s", s.duration_s},
          {"sample_rate", s.sample_rate},
          {"target", scenegen::to_string(s.target)},
          {"interferer", scenegen::to_string(s.interferer)},
          {"mic_radius", s.geometry.mic_radius},
          {"noise_radius", s.geometry.noise_radius},
          {"revolutions", s.geometry.revolutions},
          {"distance_floor", s.geometry.distance_floor}};
}

scenegen::SceneSpec scene_spec_from_json(const json& j, scenegen::SceneSpec s) {
  constexpr std::string_view where = "scene config";
  reject_unknown(j,
                 {"scenario", "k", "duration_s", "sample_rate", "target", "interferer", "mic_radius", "noise_radius",
                  "revolutions", "distance_floor"},
                 where);
  std::string tag;
  if (j.contains("scenario")) {
    read_field(j, "scenario", tag, where);
    s.scenario = scenegen::parse_scenario(tag);
  }
  read_size(j, "k", s.k, where);
  read_field(j, "duration_s", s.duration_s, where);
  read_field(j, "sample_rate", s.sample_rate, where);
  if (j.contains("target")) {
    read_field(j, "target", tag, where);
    s.target = scenegen::parse_source_kind(tag);
  }
  if (j.contains("interferer")) {
    read_field(j, "interferer", tag, where);
    s.interferer = scenegen::parse_source_kind(tag);
  }
  read_field(j, "mic_radius", s.geometry.mic_radius, where);
  read_field(j, "noise_radius", s.geometry.noise_radius, where);
  read_field(j, "revolutions", s.geometry.revolutions, where);
  read_field(j, "distance_floor", s.geometry.distance_floor, where);
  return s;
}

json to_json(const DataConfig& d) {
  return {{"scene", to_json(d.scene)},
          {"train_scenes", d.train_scenes},
          {"val_scenes", d.val_scenes},
          {"frame_size", d.frame_size},
          {"hop", d.hop}};
}

DataConfig data_config_from_json(const json& j, DataConfig d) {
  constexpr std::string_view where = "data config";
  reject_unknown(j, {"scene", "train_scenes", "val_scenes", "frame_size", "hop"}, where);
  if (j.contains("scene")) d.scene = scene_spec_from_json(j.at("scene"), d.scene);
  read_size(j, "train_scenes", d.train_scenes, where);
  read_size(j, "val_scenes", d.val_scenes, where);
  read_size(j, "frame_size", d.frame_size, where);
  read_size(j, "hop", d.hop, where);
  return d;
}

Example prepare(const scenegen::Scene& scene, std::size_t frame_size, std::size_t hop) {
  if (scene.k() == 0) throw InputError("scene has no channels");
  std::vector<Tensor> mags;
  Example ex;
  ex.seed = scene.seed;
  for (std::size_t i = 0; i < scene.k(); ++i) {
    auto spec = dsp::stft(scene.channels[i], frame_size, hop);
    mags.push_back(std::move(spec.magnitudes));
    if (i + 1 == scene.k()) ex.phase_source = std::move(spec);
  }
  ex.input = models::stack_channels(mags);
  ex.clean = scene.clean.samples;
  return ex;
}

std::vector<std::uint64_t> train_seeds(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = derive_seed(derive_seed(seed, "train"), i);
  return out;
}

std::vector<std::uint64_t> val_seeds(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = derive_seed(derive_seed(seed, "val"), i);
  return out;
}

std::vector<Example> make_examples(const scenegen::SceneSpec& spec, const std::vector<std::uint64_t>& seeds,
                                   std::size_t frame_size, std::size_t hop, std::size_t threads) {
  std::vector<Example> out(seeds.size());
  parallel_for(seeds.size(), threads,
               [&](std::size_t i) { out[i] = prepare(scenegen::make_scene(spec, seeds[i]), frame_size, hop); });
  return out;
}

double accumulate_gradient(Model& model, const Example& ex, double weight) {
  numcore::Tape tape;
  models::Binder binder(tape, model.params());
  auto mags = model.forward(binder, tape.constant(ex.input));
  auto loss = objectives::sdr_loss(dsp::recombine(mags, ex.phase_source), ex.clean);
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss " + std::to_string(value) + " on scene seed " + std::to_string(ex.seed));
  }
  tape.backward(weight == 1.0 ? loss : numcore::scale(loss, weight));
  return value;
}

std::vector<double> enhance(Model& model, const Example& ex) {
  return dsp::recombine(model.predict(ex.input), ex.phase_source).samples;
}

std::vector<double> evaluate(Model& model, const std::vector<Example>& examples, std::size_t threads) {
  std::vector<double> sdr(examples.size());
  parallel_for(examples.size(), threads,
               [&](std::size_t i) { sdr[i] = objectives::si_sdr(enhance(model, examples[i]), examples[i].clean); });
  return sdr;
}

double global_grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& [_, t] : params)
    for (double g : t.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, t] : params)
      for (double& g : t.grad()) g *= s;
  }
  return norm;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto g = p.grad();
    if (g.empty()) continue;
    auto& m = m_.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    auto& v = v_.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::restore(std::uint64_t steps, std::map<std::string, Tensor> m, std::map<std::string, Tensor> v) {
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json history = json::array();
  for (const auto& r : ckpt.history) history.push_back({r.epoch, r.train_loss, r.val_sdr});
  const json header{{"model", to_json(ckpt.model)},
                    {"train", to_json(ckpt.train)},
                    {"adam_steps", ckpt.adam_steps},
                    {"rng_state", ckpt.rng_state},
                    {"epoch", ckpt.epoch},
                    {"best_val_sdr", ckpt.best_val_sdr},
                    {"epochs_since_best", ckpt.epochs_since_best},
                    {"history", history}};
  Writer w;
  w.bytes("MVNC");
  w.u32(Checkpoint::kVersion);
  w.str(header.dump());
  Writer body;
  std::uint32_t count = 0;
  write_tensors(body, "param/", ckpt.params, count);
  write_tensors(body, "best/", ckpt.best_params, count);
  write_tensors(body, "adam_m/", ckpt.adam_m, count);
  write_tensors(body, "adam_v/", ckpt.adam_v, count);
  w.u32(count);
  auto& buf = w.buffer();
  buf.insert(buf.end(), body.buffer().begin(), body.buffer().end());
  w.u32(static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size()))));

  // Write beside the target and rename so an interrupted save leaves the old file intact.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "MVNC", 4) != 0) {
    throw FormatError(where + ": not a checkpoint (bad magic)");
  }
  Reader tail(buf.data() + buf.size() - 4, 4, where);
  const auto stored_crc = tail.u32("crc");
  const auto actual_crc = static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
  Reader r(buf.data() + 4, buf.size() - 8, where);
  const auto version = r.u32("version");
  if (version != Checkpoint::kVersion) {
    throw FormatError(where + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(Checkpoint::kVersion) + ")");
  }
  if (stored_crc != actual_crc) throw FormatError(where + ": CRC mismatch, file is corrupt or truncated");

  Checkpoint c;
  try {
    const auto header = json::parse(r.str("header"));
    c.model = model_config_from_json(header.at("model"));
    c.train = train_config_from_json(header.at("train"));
    c.adam_steps = header.at("adam_steps").get<std::uint64_t>();
    c.rng_state = header.at("rng_state").get<std::string>();
    c.epoch = header.at("epoch").get<std::size_t>();
    c.best_val_sdr = header.at("best_val_sdr").get<double>();
    c.epochs_since_best = header.at("epochs_since_best").get<std::size_t>();
    for (const auto& row : header.at("history")) {
      c.history.push_back({row.at(0).get<std::size_t>(), row.at(1).get<double>(), row.at(2).get<double>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(where + ": bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(where + ": bad header: " + e.what());
  }

  const auto count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str("tensor name");
    const auto rank = r.u32("tensor rank");
    if (rank > 8) throw FormatError(where + ": tensor '" + name + "' has implausible rank");
    numcore::Shape shape(rank);
    for (auto& d : shape) d = r.u64("tensor extent");
    std::vector<double> data(numcore::shape_size(shape));
    for (auto& v : data) v = r.f64("tensor data");
    const auto slash = name.find('/');
    const auto section = name.substr(0, slash);
    const auto key = slash == std::string::npos ? std::string() : name.substr(slash + 1);
    auto* dest = section == "param"    ? &c.params
                 : section == "best"   ? &c.best_params
                 : section == "adam_m" ? &c.adam_m
                 : section == "adam_v" ? &c.adam_v
                                       : nullptr;
    if (!dest || key.empty()) throw FormatError(where + ": unknown tensor section '" + name + "'");
    dest->insert_or_assign(key, Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw FormatError(where + ": trailing bytes after tensors");

  Model expected(c.model);
  check_against(expected.params(), c.params, "params");
  if (!c.best_params.empty()) check_against(expected.params(), c.best_params, "best params");
  return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m(ckpt.model);
  check_against(m.params(), ckpt.params, "params");
  for (auto& [name, t] : m.params()) t = Tensor(ckpt.params.at(name).shape(), ckpt.params.at(name).storage());
  return m;
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(model), config_(std::move(config)), adam_(config_.learning_rate), rng_(derive_seed(config_.seed, "shuffle")) {
  config_.validate();
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (!(ckpt.model == model_.config())) throw ConfigError("checkpoint model config differs from the model being trained");
  check_against(model_.params(), ckpt.params, "params");
  for (auto& [name, t] : model_.params()) t = Tensor(ckpt.params.at(name).shape(), ckpt.params.at(name).storage());
  adam_.restore(ckpt.adam_steps, ckpt.adam_m, ckpt.adam_v);
  std::istringstream rs(ckpt.rng_state);
  rs >> rng_;
  if (!rs) throw FormatError("checkpoint RNG state is unreadable");
  epoch_ = ckpt.epoch;
  best_val_sdr_ = ckpt.best_val_sdr;
  since_best_ = ckpt.epochs_since_best;
  best_params_ = snapshot(ckpt.best_params);
  history_ = ckpt.history;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_.config();
  c.train = config_;
  c.params = snapshot(model_.params());
  c.best_params = snapshot(best_params_);
  c.adam_steps = adam_.steps();
  c.adam_m = snapshot(adam_.first_moment());
  c.adam_v = snapshot(adam_.second_moment());
  std::ostringstream rs;
  rs << rng_;
  c.rng_state = rs.str();
  c.epoch = epoch_;
  c.best_val_sdr = best_val_sdr_;
  c.epochs_since_best = since_best_;
  c.history = history_;
  return c;
}

double Trainer::step(const std::vector<const Example*>& batch) {
  if (batch.empty()) throw InputError("empty batch");
  for (auto& [_, p] : model_.params()) {
    p.ensure_grad();
    p.zero_grad();
  }
  const double weight = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  try {
    for (const auto* ex : batch) loss += weight * accumulate_gradient(model_, *ex, weight);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (batch seeds: " + seed_list(batch) + ")");
  }
  last_grad_norm_ = clip_grad_norm(model_.params(), config_.grad_clip_norm);
  if (!std::isfinite(last_grad_norm_)) {
    throw NumericError("non-finite gradient norm (batch seeds: " + seed_list(batch) + ")");
  }
  adam_.step(model_.params());
  return loss;
}

std::vector<EpochRecord> Trainer::fit(const std::vector<Example>& train, const std::vector<Example>& val,
                                      std::size_t threads,
                                      const std::function<void(const EpochRecord&, const Trainer&)>& on_epoch) {
  if (train.empty()) throw InputError("no training scenes");
  if (val.empty()) throw InputError("no validation scenes");
  std::vector<std::size_t> order(train.size());
  while (epoch_ < config_.epochs && (history_.empty() || since_best_ < config_.early_stop_patience)) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_() % i]);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config_.batch_size); ++i) {
        batch.push_back(&train[order[i]]);
      }
      total += step(batch);
      ++batches;
    }
    const auto sdr = evaluate(model_, val, threads);
    EpochRecord rec{++epoch_, total / static_cast<double>(batches),
                    std::accumulate(sdr.begin(), sdr.end(), 0.0) / static_cast<double>(sdr.size())};
    history_.push_back(rec);
    if (rec.val_sdr > best_val_sdr_) {
      best_val_sdr_ = rec.val_sdr;
      best_params_ = snapshot(model_.params());
      since_best_ = 0;
    } else {
      ++since_best_;
    }
    if (on_epoch) on_epoch(rec, *this);
  }
  if (!best_params_.empty()) {
    for (auto& [name, t] : model_.params()) {
      t = Tensor(best_params_.at(name).shape(), best_params_.at(name).storage());
    }
  }
  return history_;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,val_sdr\n";
  out.precision(17);
  for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_sdr << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mvn::trainer
