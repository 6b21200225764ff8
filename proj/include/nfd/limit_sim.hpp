#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nfd/activation.hpp"
#include "nfd/data.hpp"
#include "nfd/linalg.hpp"
#include "nfd/rng.hpp"

namespace nfd {

/// Infinite-width training limit of a depth-muP pre-act ResNet, simulated
/// with P particles on the grid t_l = l * tau, tau = T / steps_L.
///
/// With correction_term on this is the finite-depth mean-field recursion at
/// depth L = steps_L, including the tau^2 forward-backward terms; with it off
/// it is the Euler-Maruyama scheme of the forward-backward SDE system.
struct LimitConfig {
  int steps_L = 64;
  double T = 1.0;
  int particles = 10000;
  int k_max = 0;
  double eta_c = 0.1;
  Activation activation{ActivationKind::tanh};
  LossKind loss = LossKind::mse;
  bool correction_term = false;
  /// Minimum eigenvalues below this are flagged (not fatal).
  double spd_floor = 1e-8;
  unsigned workers = 1;

  double tau() const { return T / steps_L; }
};

void validate(const LimitConfig& cfg);

/// Contiguous [time][iteration][particle] block of real64.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int times, int iterations, int particles)
      : times_(times), iterations_(iterations), particles_(particles),
        data_(static_cast<std::size_t>(times) * iterations * particles, 0.0) {}

  int times() const noexcept { return times_; }
  int iterations() const noexcept { return iterations_; }
  int particles() const noexcept { return particles_; }

  double* row(int t, int k) { return data_.data() + offset(t, k); }
  const double* row(int t, int k) const { return data_.data() + offset(t, k); }
  double at(int t, int k, int p) const { return data_[offset(t, k) + p]; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

 private:
  std::size_t offset(int t, int k) const {
    return (static_cast<std::size_t>(t) * iterations_ + k) * particles_;
  }

  int times_ = 0;
  int iterations_ = 0;
  int particles_ = 0;
  std::vector<double> data_;
};

/// Feature h (times 0..L) and gradient g (0..L) trajectories of every particle.
struct ParticleEnsemble {
  Trajectory h;
  Trajectory g;
};

/// Realized Gaussian increments of the forward (dw) and backward (dw_tilde)
/// Brownian motions. Time index l-1 holds the increment of layer l.
struct NoiseLedger {
  Trajectory dw;
  Trajectory dw_tilde;
  int iterations_recorded = 0;
};

/// Sigma_t^{(k)} and Theta_t^{(k)}: the empirical second-moment matrices
/// over iterations 0..k at each time index, with their minimum eigenvalues.
struct CovSeries {
  std::vector<std::vector<Matrix>> sigma;  // [t][k], (k+1) x (k+1)
  std::vector<std::vector<Matrix>> theta;
  std::vector<std::vector<double>> sigma_min;
  std::vector<std::vector<double>> theta_min;
};

struct JitterEvent {
  enum class Source { input_gram, forward, backward } source;
  int time_index;
  int iteration;
  double jitter;
};

struct SpdFlag {
  bool forward;  // Sigma (true) or Theta (false)
  int time_index;
  int iteration;
  double min_eigenvalue;
};

struct LimitRun {
  LimitConfig cfg;
  ParticleEnsemble ensemble;
  NoiseLedger ledger;
  CovSeries cov;
  std::vector<double> outputs;         // f^{(k)}
  std::vector<double> output_se;       // particle standard error of f^{(k)}
  std::vector<double> loss_derivs;     // L'(f^{(k)}, y^{(k)})
  std::vector<JitterEvent> jitter_events;
  std::vector<SpdFlag> spd_flags;
};

/// Sample k trains iteration k; needs at least k_max + 1 samples.
/// Throws SpdViolation when a covariance is indefinite beyond -1e-9 even
/// after jitter.
LimitRun simulate_training(const LimitConfig& cfg, const std::vector<Sample>& samples, const Rng& rng);

double limit_output(const LimitRun& run, int k);

struct CorrectionGapPoint {
  int steps_L;
  double gap;     // |f_on^{(k_max)} - f_off^{(k_max)}|
  double f_on;
  double f_off;
};

/// Paired runs with the same noise, correction on vs off, per steps_L.
std::vector<CorrectionGapPoint> correction_gap(const LimitConfig& cfg, const std::vector<Sample>& samples,
                                               const Rng& rng,
                                               const std::vector<int>& steps = {8, 16, 32, 64, 128});

struct CovarianceMinimum {
  int time_index;
  int iteration;
  double sigma_min;
  double theta_min;
};

std::vector<CovarianceMinimum> covariance_minima(const LimitRun& run);

/// Dump of one trajectory block: magic "NFDTRAJ1", then P, steps_L, k_max
/// as u64 little-endian, then [time][iteration][particle] real64 LE.
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

}  // namespace nfd
