#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nfd/config.hpp"
#include "nfd/data.hpp"
#include "nfd/limit_sim.hpp"
#include "nfd/net.hpp"
#include "nfd/records.hpp"

namespace nfd {

/// Stream tags under a run seed.
enum StreamTag : std::uint64_t {
  kStreamData = 11,
  kStreamInit = 12,
  kStreamSampler = 13,
  kStreamProbe = 14,
  kStreamLimit = 15,
  kStreamKernel = 16,
};

Rng seeded(std::uint64_t seed, StreamTag tag, std::uint64_t sub = 0);

/// Synthetic sphere inputs with teacher labels.
Dataset synthetic_dataset(std::uint64_t seed, int size, int dim, TeacherKind teacher, double noise_std);

/// Dataset named by the spec. CIFAR needs figure_scale.
Dataset make_dataset(const ExperimentSpec& spec, std::uint64_t seed, bool figure_scale);

struct GradcheckResult {
  double max_rel_error = 0.0;
  int entries_checked = 0;
  int entries_skipped = 0;  // relu kink crossed by the difference stencil
};

/// Analytic loss gradient vs central differences with step 1e-5 (1 + |theta|)
/// after `warm_steps` SGD updates, so the learned updates are exercised.
/// Error per tensor: max |a - b| / max(max |a|, max |b|).
GradcheckResult gradcheck(const NetConfig& cfg, std::uint64_t seed, int warm_steps = 2);

/// f^{(0..k)} of a finite net trained online on samples[0..k-1] and
/// evaluated on samples[k].
std::vector<double> finite_outputs(const NetConfig& cfg, std::uint64_t seed, const std::vector<Sample>& samples,
                                   int k_max, LossKind loss = LossKind::mse);

/// Mean over the online steps of |f_standard - f_decoupled| with shared
/// initialization and sample stream; +inf when either run diverges.
double gia_mean_gap(const NetConfig& cfg, std::uint64_t seed, const Dataset& data, int steps);

/// Collapse metrics on a fresh sample after `steps` online updates.
CollapseMetrics collapse_run(const NetConfig& cfg, std::uint64_t seed, const Dataset& data, int steps);

/// Mean loss over the dataset after `steps` online updates; +inf when the
/// run diverges.
double final_training_loss(const NetConfig& cfg, std::uint64_t seed, const Dataset& data, int steps,
                           const TrainOptions& options = {});

struct Grid {
  std::vector<std::function<std::vector<ResultRecord>()>> points;
  /// Summary rows computed from all point rows after the grid finishes.
  std::function<std::vector<ResultRecord>(const std::vector<ResultRecord>&)> summarize;
};

Grid make_grid(const ExperimentSpec& spec, bool figure_scale);

/// Help-text line mapping the experiment to the claim it reproduces.
std::string experiment_description(Experiment e);

}  // namespace nfd
