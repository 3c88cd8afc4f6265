// wgarray: run the waveguide-array experiments from a config file.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wgarray/config.hpp"
#include "wgarray/errors.hpp"
#include "wgarray/experiments.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

wgarray::Config load(const std::string& path, const std::vector<std::string>& sets,
                     const std::string& seed) {
  auto assignments = wgarray::read_config_file(path);
  for (const auto& s : sets) assignments.push_back(wgarray::parse_override(s));
  if (!seed.empty()) assignments.push_back({"seed", seed, "--seed"});
  return wgarray::Config::resolve(assignments);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-pair generation and entanglement in pumped waveguide arrays"};
  app.set_version_flag("--version", std::string("wgarray ") + WGARRAY_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", seed;
  std::vector<std::string> sets;
  bool quiet = false;
  unsigned workers = 0;

  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--set", sets, "override a config key, key=value (repeatable)");
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--seed", seed, "base seed (overrides the config)");
  run->add_flag("--quiet", quiet, "no progress output");
  run->add_option("--workers", workers,
                  "worker threads (default: WGARRAY_WORKERS or the hardware concurrency)")
      ->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list-experiments", "list the available experiments");

  auto* validate = app.add_subcommand("validate", "check a config file and print it resolved");
  validate->add_option("--config", config_path, "config file")->required();
  validate->add_option("--set", sets, "override a config key, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (list->parsed()) {
    for (const auto& e : wgarray::experiment_catalogue()) {
      std::printf("%-20s %s\n", std::string(e.name).c_str(), std::string(e.summary).c_str());
    }
    return 0;
  }

  wgarray::Config config;
  try {
    config = load(config_path, sets, seed);
  } catch (const wgarray::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  if (validate->parsed()) {
    std::cout << config.render();
    return 0;
  }

  const double interval = config.real("progress_interval");
  wgarray::Progress progress(quiet, interval, config.experiment());
  wgarray::RunContext ctx;
  ctx.workers = workers > 0 ? workers : wgarray::default_workers();
  ctx.progress = &progress;
  try {
    progress.note("start, " + std::to_string(ctx.workers) + " workers", true);
    const auto tables = wgarray::run_experiment(config, ctx);
    const auto files = wgarray::write_outputs(config, tables, out_dir);
    for (const auto& f : files) progress.note("wrote " + f, true);
  } catch (const wgarray::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const wgarray::InvariantViolation& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const wgarray::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
