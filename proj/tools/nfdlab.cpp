#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "nfd/config.hpp"
#include "nfd/errors.hpp"
#include "nfd/experiments.hpp"
#include "nfd/harness.hpp"

namespace {

std::string experiment_help() {
  std::string text = "Experiments:\n";
  for (nfd::Experiment e : nfd::all_experiments()) {
    std::string name(nfd::experiment_name(e));
    name.resize(std::max<std::size_t>(name.size(), 24), ' ');
    text += "  " + name + nfd::experiment_description(e) + "\n";
  }
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural feature dynamics lab: finite ResNets vs their depth/width limit"};
  app.footer(experiment_help());

  std::string experiment;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  unsigned workers = 1;
  bool figure_scale = false;
  app.add_option("experiment", experiment, "experiment name")->required();
  app.add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "run a single seed instead of the config's list");
  auto* out_opt = app.add_option("--out", out, "CSV output path (default: the config's output)");
  app.add_option("--workers", workers, "grid points run concurrently")->check(CLI::PositiveNumber);
  app.add_flag("--figure-scale", figure_scale, "allow batch > 1 and CIFAR-10 runs");
  CLI11_PARSE(app, argc, argv);

  try {
    const nfd::Experiment e = nfd::parse_experiment(experiment);
    nfd::ExperimentSpec spec = nfd::parse_config(config);
    if (spec.experiment != e) {
      std::cerr << "note: config names experiment '" << nfd::experiment_name(spec.experiment) << "', running '"
                << experiment << "'\n";
      spec.experiment = e;
    }
    nfd::RunOptions options;
    if (*seed_opt) {
      options.seed = seed;
      spec.seeds = {static_cast<std::int64_t>(seed)};
    }
    if (*out_opt) options.out = out;
    options.workers = workers;
    options.figure_scale = figure_scale;
    const auto rows = nfd::run(spec, options);
    std::cerr << rows.size() << " rows, config hash " << nfd::config_hash(spec) << "\n";
  } catch (const nfd::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
