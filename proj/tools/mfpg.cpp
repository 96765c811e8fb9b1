// mfpg <mode> --config <path> [--out <dir>] [--seed <int>]

#include "mfpg/errors.hpp"
#include "mfpg/experiment.hpp"
#include "mfpg/kernels.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"Mean-field softmax policy gradient experiments"};
  std::string mode_name;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool timing = false;

  app.add_option("mode", mode_name, "bandit | mdp | verify | chaos")
      ->required()
      ->check(CLI::IsMember({"bandit", "mdp", "verify", "chaos"}));
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--out", out_dir, "output directory (overrides out_dir)");
  app.add_option("--seed", seed, "base seed (overrides seed)");
  app.add_flag("--timing", timing, "record wall-clock milliseconds in train.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mfpg::exit_code::config;
  }

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "i/o error: cannot read config '" << config_path << "'\n";
    return mfpg::exit_code::io;
  }
  std::ostringstream text;
  text << in.rdbuf();

  mfpg::ExperimentConfig config;
  try {
    config = mfpg::parse_config(text.str(), mfpg::parse_mode(mode_name));
  } catch (const mfpg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mfpg::exit_code::config;
  }
  if (out_dir) config.out_dir = *out_dir;
  if (seed) config.seed = *seed;

  std::cerr << "kernels: " << mfpg::kernels::backend_name(mfpg::kernels::default_backend()) << '\n';
  return mfpg::run(config, std::cerr, mfpg::RunOptions{timing});
}
