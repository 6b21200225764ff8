#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "nfd/rng.hpp"

namespace nfd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Default jitter ladder for SPD factorizations.
inline const std::vector<double> kDefaultJitter{0.0, 1e-10, 1e-8, 1e-6};

/// Schur complements in (-kSchurClampTolerance, 0) are treated as round-off.
inline constexpr double kSchurClampTolerance = 1e-12;

Matrix sample_std_normal_matrix(Rng& rng, int rows, int cols);
Vector sample_std_normal_vector(Rng& rng, int size);

struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;
};

/// Lower factor of A + jitter*I for the first jitter in `schedule` that
/// factorizes. Throws NotPositiveDefinite when the whole ladder fails.
CholeskyFactor cholesky_spd(const Matrix& a, std::span<const double> schedule = kDefaultJitter);

/// Throws DimensionMismatch for non-square input.
double min_symmetric_eigenvalue(const Matrix& a);

bool is_symmetric(const Matrix& a, double relative_tolerance = 1e-12);

/// Precomputed conditional law of the last coordinate of a Gaussian vector
/// given the leading ones: mean = weights . prev, sd = std.
struct ConditionalLaw {
  Vector weights;
  double std = 0.0;
  double jitter = 0.0;  // jitter needed to factor the leading block

  double mean(std::span<const double> prev) const;
};

ConditionalLaw conditional_law(const Matrix& sigma, std::span<const double> schedule = kDefaultJitter);

struct ConditionalMoments {
  double mean;
  double std;
};

ConditionalMoments conditional_gaussian(const Matrix& sigma, std::span<const double> prev);

}  // namespace nfd
