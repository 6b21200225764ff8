#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nfd/config.hpp"
#include "nfd/errors.hpp"

using namespace nfd;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const ExperimentSpec s = parse_config_text("experiment = \"gradcheck\"\n");
  ExperimentSpec d;
  d.experiment = Experiment::gradcheck;
  CHECK(s == d);
  CHECK(s.schema_version == kSchemaVersion);
  CHECK(s.seeds == std::vector<std::int64_t>{0});
  CHECK(s.widths == std::vector<std::int64_t>{128});
  CHECK(s.alpha_mode == "mup");
}

TEST_CASE("unknown keys are rejected by name") {
  const std::string msg = error_of("experiment = \"collapse\"\nwidht = [128]\n");
  CHECK(msg.find("widht") != std::string::npos);
  CHECK(msg.find("2") != std::string::npos);
}

TEST_CASE("malformed values") {
  CHECK_FALSE(error_of("widths = 128.5\n").empty());
  CHECK_FALSE(error_of("seeds = [1, 2\n").empty());
  CHECK_FALSE(error_of("steps = 10\nsteps = 11\n").empty());
  CHECK_FALSE(error_of("experiment = \"nope\"\n").empty());
  CHECK_FALSE(error_of("loss = mse\n").empty());
  CHECK(error_of("# comment only\n\n").empty());
}

TEST_CASE("serialize round trip") {
  const ExperimentSpec s = parse_config_text(
      "experiment = \"nfd_train_convergence\"  # trailing\n"
      "seeds = [3, 4]\nwidths = [256, 1024]\ndepths = [8]\nT = [0.5, 2.0]\neta_c = [0.1]\n"
      "activations = [\"tanh\", \"relu\"]\ncorrection_term = false\nnoise_std = 0.125\noutput = \"out dir/a.csv\"\n");
  CHECK(s.widths == std::vector<std::int64_t>{256, 1024});
  CHECK(s.T == std::vector<double>{0.5, 2.0});
  CHECK_FALSE(s.correction_term);
  const ExperimentSpec back = parse_config_text(serialize(s));
  CHECK(back == s);
  CHECK(serialize(back) == serialize(s));
  CHECK(config_hash(back) == config_hash(s));
  CHECK(config_hash(s).size() == 16);
  ExperimentSpec other = s;
  other.steps += 1;
  CHECK(config_hash(other) != config_hash(s));
}

TEST_CASE("round trip through a file") {
  const auto path = std::filesystem::temp_directory_path() / "nfdlab_cfg_test.toml";
  ExperimentSpec s;
  s.experiment = Experiment::hp_sweep;
  s.eta_c = {0.125, 0.25, 0.5, 1.0, 2.0};
  s.lr_modes = {"standard", "depth_aware"};
  std::ofstream(path) << serialize(s);
  CHECK(parse_config(path) == s);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_config(path), ConfigError);
}

TEST_CASE("validation") {
  ExperimentSpec s;
  s.experiment = Experiment::nfd_train_convergence;
  s.seeds.clear();
  try {
    validate(s);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seeds must be non-empty") != std::string::npos);
  }
  s = ExperimentSpec{};
  s.widths = {0};
  CHECK_THROWS_AS(validate(s), ConfigError);
  s = ExperimentSpec{};
  validate(s);
}

TEST_CASE("experiment names") {
  for (Experiment e : all_experiments()) CHECK(parse_experiment(experiment_name(e)) == e);
  CHECK(all_experiments().size() == 10);
}
