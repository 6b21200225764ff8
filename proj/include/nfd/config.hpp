#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nfd {

enum class Experiment {
  preact_postact,
  init_sde_convergence,
  nfd_train_convergence,
  gia,
  eigen_monitor,
  collapse,
  hp_sweep,
  kernel_capacity,
  correction_gap,
  gradcheck,
};

inline constexpr int kSchemaVersion = 1;

Experiment parse_experiment(std::string_view name);
std::string_view experiment_name(Experiment e);
const std::vector<Experiment>& all_experiments();

/// Declarative experiment configuration. Every field has a default; the
/// config file may set any subset. Grids are the array-valued fields.
struct ExperimentSpec {
  Experiment experiment = Experiment::gradcheck;
  int schema_version = kSchemaVersion;
  std::string output;

  std::vector<std::int64_t> seeds{0};
  std::vector<std::int64_t> widths{128};
  std::vector<std::int64_t> depths{4};
  std::vector<double> T{1.0};
  std::vector<double> eta_c{0.1};

  std::vector<std::string> blocks{"preact_one"};
  std::vector<std::string> activations{"relu"};
  std::string alpha_mode = "mup";
  std::vector<std::string> scalings{"depth_mup"};  // depth_mup | plain_mup
  std::vector<std::string> lr_modes{"standard"};   // standard | depth_aware
  bool decoupled_freeze_updates = false;

  std::string dataset = "sphere_teacher";  // sphere_teacher | cifar10
  std::string teacher = "narrow_resnet";
  std::int64_t input_dim = 8;
  std::int64_t dataset_size = 256;
  double noise_std = 0.0;
  std::string cifar_file = "data_batch_1.bin";
  std::int64_t cifar_downsample = 48;
  std::string loss = "mse";

  std::int64_t steps = 50;
  std::int64_t batch = 1;
  std::int64_t k_max = 2;
  std::int64_t particles = 10000;
  std::vector<std::int64_t> steps_L{8, 16, 32, 64, 128};
  bool correction_term = true;
  std::int64_t reference_steps = 256;
  double spd_floor = 1e-8;

  std::int64_t kernel_steps = 64;
  std::int64_t test_size = 64;
  double ridge_lambda = 1e-3;
  bool capacity_finite_net = false;

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Strict parse of the flat TOML subset: `key = value` lines, # comments,
/// strings, integers, floats, booleans and single-line arrays. Unknown or
/// repeated keys and type errors raise ConfigError naming line and key.
ExperimentSpec parse_config_text(std::string_view text, const std::string& origin = "<config>");
ExperimentSpec parse_config(const std::filesystem::path& path);

/// Canonical text form; parse_config_text(serialize(s)) == s.
std::string serialize(const ExperimentSpec& spec);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentSpec& spec);

/// Semantic checks shared by every experiment (ConfigError with field path).
void validate(const ExperimentSpec& spec);

}  // namespace nfd
