// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvn/cli/commands.hpp"
#include "mvn/cli/gradsuite.hpp"
#include "mvn/errors.hpp"
#include "mvn/numcore/ops.hpp"

namespace fs = std::filesystem;
using namespace mvn::cli;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mvn_cli_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig toy(std::vector<std::string> extra = {}) {
  std::vector<std::string> sets{"model.input_bins=9",  "model.front_dim=6",       "model.hidden=5",
                                "data.frame_size=16",  "data.hop=8",              "data.scene.duration_s=0.05",
                                "data.scene.k=3",      "data.train_scenes=8",     "data.val_scenes=2",
                                "train.epochs=2",      "train.batch_size=2",      "train.channels_k_train=3",
                                "gen.n_scenes=5",      "sweep.n_scenes=3",        "sweep.k_max=3"};
  sets.insert(sets.end(), extra.begin(), extra.end());
  return load_run_config(std::nullopt, sets);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(MVN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfig, OverridesAndStrictKeys) {
  auto c = toy({"seed=42", "data.scene.scenario=static_rand", "sweep.kind=static"});
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.model.hidden, 5u);
  EXPECT_EQ(c.data.scene.scenario, mvn::scenegen::Scenario::static_rand);
  EXPECT_EQ(c.sweep.kind, "static");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(run_config_from_json(to_json(c)).model, c.model);

  EXPECT_THROW(toy({"model.hiden=3"}), mvn::ConfigError);
  EXPECT_THROW(toy({"colour=blue"}), mvn::ConfigError);
  EXPECT_THROW(toy({"novalue"}), mvn::UsageError);
  EXPECT_THROW(toy({"model.input_bins=10"}).validate(), mvn::ConfigError);
  EXPECT_THROW(toy({"sweep.kind=sideways"}).validate(), mvn::ConfigError);

  json j = json::object();
  apply_override(j, "a.b.c=[1,2]");
  apply_override(j, "a.name=plain text");
  EXPECT_EQ(j["a"]["b"]["c"], json::array({1, 2}));
  EXPECT_EQ(j["a"]["name"], "plain text");
}

TEST(Gen, WritesScenesAndStableManifest) {
  const auto out = fresh_dir("gen");
  auto cfg = toy({"data.scene.scenario=dynamic"});
  const auto manifest = cmd_gen(cfg, {out});
  ASSERT_EQ(manifest.at("scenes").size(), 5u);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    if (!e.is_directory()) continue;
    ++dirs;
    std::size_t wavs = 0;
    for (const auto& f : fs::directory_iterator(e.path())) wavs += f.path().extension() == ".wav";
    EXPECT_EQ(wavs, cfg.data.scene.k + 1);
    EXPECT_TRUE(fs::exists(e.path() / "meta.json"));
  }
  EXPECT_EQ(dirs, 5u);
  const auto first = slurp(out / "manifest.json");

  EXPECT_THROW(cmd_gen(cfg, {out}), mvn::UsageError);
  cmd_gen(cfg, {out, true});
  EXPECT_EQ(slurp(out / "manifest.json"), first);
  fs::remove_all(out);
}

TEST(Gen, ZeroChannelsFailsBeforeIo) {
  const auto out = fresh_dir("gen_k0");
  EXPECT_THROW(cmd_gen(toy({"data.scene.k=0"}), {out}), mvn::ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Train, SmokeRunAndResume) {
  const auto out = fresh_dir("train");
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  auto hist = cmd_train(toy(), {out}, std::nullopt, log);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
  ASSERT_EQ(hist.size(), 2u);
  for (const char* f : {"config.json", "run.json", "history.csv", "checkpoint.mvnc", "last.mvnc"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }

  const auto resumed_dir = fresh_dir("train_resume");
  auto more = cmd_train(toy({"train.epochs=3"}), {resumed_dir}, out / "last.mvnc", log);
  ASSERT_EQ(more.size(), 3u);
  EXPECT_EQ(more.back().epoch, 3u);
  EXPECT_EQ(more[0].train_loss, hist[0].train_loss);
  EXPECT_THROW(cmd_train(toy({"model.hidden=4"}), {fresh_dir("x")}, out / "last.mvnc", log), mvn::ConfigError);
  fs::remove_all(out);
  fs::remove_all(resumed_dir);
}

TEST(Train, FromGeneratedSceneDirectory) {
  const auto scenes = fresh_dir("scenes");
  cmd_gen(toy({"gen.n_scenes=4"}), {scenes});
  const auto out = fresh_dir("train_dir");
  std::ostringstream log;
  auto hist = cmd_train(toy({"train_dir=\"" + scenes.string() + "\"", "train.epochs=1"}), {out}, std::nullopt, log);
  EXPECT_EQ(hist.size(), 1u);
  EXPECT_THROW(cmd_train(toy({"train_dir=\"/nonexistent/scenes\""}), {fresh_dir("y")}, std::nullopt, log),
               mvn::IoError);
  fs::remove_all(scenes);
  fs::remove_all(out);
}

TEST(Sweep, RowCountsAndByteIdenticalCsv) {
  const auto a = fresh_dir("sweep_a"), b = fresh_dir("sweep_b");
  std::ostringstream log;
  cmd_train(toy({"train.epochs=1"}), {a}, std::nullopt, log);
  cmd_train(toy({"train.epochs=1", "model.variant=avg_rnn"}), {b}, std::nullopt, log);
  const std::vector<CheckpointArg> ckpts{{"", a / "checkpoint.mvnc"}, {"", b / "checkpoint.mvnc"}};

  const auto s1 = fresh_dir("sweep_1"), s2 = fresh_dir("sweep_2");
  auto rows = cmd_sweep(toy(), {s1}, ckpts, log);
  EXPECT_EQ(rows.size(), 2u * 3u);
  cmd_sweep(toy(), {s2}, ckpts, log);
  EXPECT_EQ(slurp(s1 / "results.csv"), slurp(s2 / "results.csv"));
  EXPECT_TRUE(fs::exists(s1 / "run.json"));

  const auto s3 = fresh_dir("sweep_3");
  auto stat = cmd_sweep(toy({"sweep.kind=static", "sweep.k_max=2", "sweep.per_scene_json=true"}), {s3},
                        {{"m", a / "checkpoint.mvnc"}}, log);
  EXPECT_EQ(stat.size(), 2u * 2u);
  EXPECT_TRUE(fs::exists(s3 / "scores.json"));

  try {
    cmd_sweep(toy({"data.frame_size=32", "model.input_bins=17"}), {fresh_dir("z")}, ckpts, log);
    FAIL();
  } catch (const mvn::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("input_bins"), std::string::npos);
  }
  EXPECT_THROW(cmd_sweep(toy(), {fresh_dir("w")}, {{"", a / "checkpoint.mvnc"}, {"", a / "checkpoint.mvnc"}}, log),
               mvn::UsageError);
  for (const auto& d : {a, b, s1, s2, s3}) fs::remove_all(d);
}

TEST(Gradcheck, CoverageMatchesRegistry) {
  const auto suite = gradient_suite();
  std::set<std::string> covered;
  for (const auto& gc : suite) covered.merge(ops_used(gc));
  for (const auto& op : differentiable_ops()) EXPECT_TRUE(covered.contains(op)) << op;
  std::ostringstream out;
  EXPECT_TRUE(cmd_gradcheck(out));
  EXPECT_NE(out.str().find("coverage: 20/20"), std::string::npos) << out.str();
}

TEST(Gradcheck, CorruptedBackwardIsReportedForThatCaseOnly) {
  using namespace mvn::numcore;
  auto suite = gradient_suite();
  suite.resize(4);
  suite.push_back({"corrupt_square",
                   [](std::mt19937_64& r) { return std::vector{random_normal({4}, r)}; },
                   [](Tape& t, std::span<const Var> v) {
                     Tensor out(v[0].shape());
                     for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[0].value()[i] * v[0].value()[i];
                     const Var x = v[0];
                     auto y = t.record("corrupt_square", std::move(out), {x}, [x](Tape& tp, std::span<const double> g) {
                       auto gx = tp.grad_sink(x);
                       // Should be 2·x·g.
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 3.0 * x.value()[i] * g[i];
                     });
                     return sum(y);
                   }});
  const auto report = run_suite(suite);
  EXPECT_EQ(report.failures(), std::vector<std::string>{"corrupt_square"});
  EXPECT_FALSE(report.passed());
}

TEST(Tool, ExitCodes) {
  EXPECT_EQ(run_tool("--bogus"), 2);
  EXPECT_EQ(run_tool("gen --out " + fresh_dir("tool_k0").string() + " --set data.scene.k=0"), 2);
  EXPECT_EQ(run_tool("gen --out " + fresh_dir("tool_key").string() + " --set nope=1"), 2);
  EXPECT_EQ(run_tool("train --out " + fresh_dir("tool_dir").string() +
                     " --set train_dir=/nonexistent/scenes --set model.input_bins=9 --set data.frame_size=16"
                     " --set data.hop=8"),
            2);
  const auto out = fresh_dir("tool_gen");
  EXPECT_EQ(run_tool("gen --out " + out.string() +
                     " --seed 3 --set gen.n_scenes=2 --set data.scene.duration_s=0.05 --set data.scene.k=2"),
            0);
  EXPECT_TRUE(fs::exists(out / "scene_001" / "ch02.wav"));
  EXPECT_EQ(run_tool("gen --out " + out.string() + " --set gen.n_scenes=2"), 2);
  fs::remove_all(out);
}
