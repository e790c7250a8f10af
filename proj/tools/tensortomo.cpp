#include "tensortomo/parallel.hpp"
#include "tensortomo/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace tensortomo;
  CLI::App app{"Numerical lab for the geodesic ray transform of symmetric 2-tensors"};
  std::string command, config_path, out_dir = "out";
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("command", command, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  app.add_option("--config", config_path, "Config file (section.key = value lines)")->required();
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", threads, "Worker cap (0 = hardware)")->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Overrides ensemble.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ConfigError;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return ConfigError;
  }
  cfg.experiment = command;
  if (*seed_opt) cfg.seed = seed;
  if (threads > 0) set_thread_cap(threads);
  return run(cfg, out_dir, std::cerr);
}
