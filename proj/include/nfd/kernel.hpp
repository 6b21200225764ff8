#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nfd/activation.hpp"
#include "nfd/linalg.hpp"
#include "nfd/rng.hpp"

namespace nfd {

/// Coupled simulation of the initialization-time forward SDE
/// dh_t = dw_t, d<w^i, w^j>_t = E[phi(h^i_t) phi(h^j_t)] dt
/// for M inputs at once, one M-dimensional state per particle.
struct KernelConfig {
  double T = 1.0;
  int steps = 64;
  int particles = 10000;
  Activation activation{ActivationKind::relu};
  Matrix inputs;  // M x d
  unsigned workers = 1;
  /// Particle batches used for the batch-means standard error.
  int batches = 32;
};

struct GramMatrix {
  Matrix values;  // M x M, exactly symmetric
  Matrix se;      // entrywise Monte-Carlo standard error
  double T = 0.0;
  Activation activation{};
  int particles = 0;
  std::uint64_t seed = 0;
  double max_jitter = 0.0;  // largest jitter used by the per-step factorizations

  int size() const { return static_cast<int>(values.rows()); }
  double max_se() const { return se.size() ? se.maxCoeff() : 0.0; }
};

/// Input Gram <x_i, x_j> / d.
Matrix input_gram(const Matrix& inputs);

/// C_T = <x_i, x_j>/d + sum_s E[phi(h_s^i) phi(h_s^j)] tau (left endpoint).
/// Throws SpdViolation when a per-step covariance cannot be factorized.
GramMatrix nngp_gram(const KernelConfig& cfg, const Rng& rng);

/// Grams at each checkpoint time from one simulation, so earlier
/// checkpoints are prefix sums of later ones. Checkpoints are rounded to the
/// grid tau = cfg.T / cfg.steps and must lie in [0, cfg.T].
std::vector<GramMatrix> nngp_gram_series(const KernelConfig& cfg, const Rng& rng,
                                         const std::vector<double>& checkpoints);

double spd_min_eig(const GramMatrix& gram);

struct NestingGap {
  double gap;       // lambda_min(Gram_{t'} - Gram_t)
  double entry_se;  // largest entrywise standard error of the difference
};

/// Runs to t_prime on cfg's grid and differences the two checkpoints.
/// Throws DomainError unless 0 < t <= t_prime.
NestingGap nesting_gap(const Matrix& inputs, double t, double t_prime, const KernelConfig& cfg, const Rng& rng);

/// E[phi(u) phi(v)] for standard normals with correlation rho.
double dual_activation(double rho, const Activation& activation);

/// Solves (Gram + lambda I) a = labels and returns test_cross a.
Vector kernel_ridge(const Matrix& gram, const Vector& labels, double lambda, const Matrix& test_cross);

/// One header line `# nngp T=<T> act=<kind> P=<P> seed=<seed>` then M rows.
void write_gram_csv(const std::filesystem::path& path, const GramMatrix& gram);
GramMatrix read_gram_csv(const std::filesystem::path& path);

}  // namespace nfd
