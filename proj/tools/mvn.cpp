// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: gen, train, sweep, gradcheck.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvn/cli/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool force = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory")->required();
  cmd->add_option("--seed", f.seed, "Run seed (overrides the config)");
  cmd->add_option("--threads", f.threads, "Scene-level worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", f.force, "Write into a non-empty output directory");
  cmd->add_option("--set", f.sets, "Config override key=value, dotted keys allowed")->take_all();
}

mvn::cli::RunConfig resolve(const Flags& f) {
  auto sets = f.sets;
  if (f.seed) sets.push_back("seed=" + std::to_string(*f.seed));
  if (f.threads) sets.push_back("threads=" + std::to_string(*f.threads));
  std::optional<std::filesystem::path> file;
  if (!f.config.empty()) file = f.config;
  return mvn::cli::load_run_config(file, sets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multichannel denoising networks: scene generation, training and evaluation"};
  app.set_version_flag("--version", mvn::cli::kToolVersion);
  app.require_subcommand(1);

  Flags gen_flags, train_flags, sweep_flags;
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes");
  add_common(gen, gen_flags);

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_flags);
  std::string resume;
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Evaluate checkpoints across channel counts");
  add_common(sweep, sweep_flags);
  std::vector<std::string> checkpoints;
  sweep->add_option("--checkpoint", checkpoints, "Checkpoint as tag=path or path")->required();

  app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const auto manifest = mvn::cli::cmd_gen(resolve(gen_flags), {gen_flags.out, gen_flags.force});
      std::cout << "wrote " << manifest.at("scenes").size() << " scenes to " << gen_flags.out << "\n";
    } else if (*train) {
      std::optional<std::filesystem::path> from;
      if (!resume.empty()) from = resume;
      mvn::cli::cmd_train(resolve(train_flags), {train_flags.out, train_flags.force}, from, std::cout);
    } else if (*sweep) {
      std::vector<mvn::cli::CheckpointArg> args;
      for (const auto& c : checkpoints) args.push_back(mvn::cli::parse_checkpoint_arg(c));
      const auto rows = mvn::cli::cmd_sweep(resolve(sweep_flags), {sweep_flags.out, sweep_flags.force}, args, std::cout);
      std::cout << "wrote " << rows.size() << " rows to " << sweep_flags.out << "/results.csv\n";
    } else {
      return mvn::cli::cmd_gradcheck(std::cout) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mvn::cli::exit_code_for(e);
  }
  return 0;
}
