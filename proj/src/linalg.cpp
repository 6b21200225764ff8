#include "nfd/linalg.hpp"

#include <cmath>
#include <string>

#include "nfd/errors.hpp"

namespace nfd {

Matrix sample_std_normal_matrix(Rng& rng, int rows, int cols) {
  if (rows < 1 || cols < 1) throw DimensionMismatch("sample_std_normal_matrix: rows and cols must be >= 1");
  Matrix m(rows, cols);
  double* data = m.data();
  const Eigen::Index count = m.size();
  for (Eigen::Index i = 0; i < count; ++i) data[i] = rng.normal();
  return m;
}

Vector sample_std_normal_vector(Rng& rng, int size) {
  Vector v(size);
  for (int i = 0; i < size; ++i) v[i] = rng.normal();
  return v;
}

bool is_symmetric(const Matrix& a, double relative_tolerance) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= relative_tolerance * scale;
}

CholeskyFactor cholesky_spd(const Matrix& a, std::span<const double> schedule) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky_spd: matrix is not square");
  if (!is_symmetric(a)) throw NotPositiveDefinite("cholesky_spd: matrix is not symmetric");
  const auto n = a.rows();
  for (double jitter : schedule) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      CholeskyFactor out;
      out.lower = llt.matrixL();
      out.jitter = jitter;
      return out;
    }
  }
  throw NotPositiveDefinite("cholesky_spd: " + std::to_string(n) + "x" + std::to_string(n) +
                            " matrix not positive definite at any jitter in the schedule");
}

double min_symmetric_eigenvalue(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("min_symmetric_eigenvalue: matrix is not square");
  if (a.rows() == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double ConditionalLaw::mean(std::span<const double> prev) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) acc += weights[i] * prev[i];
  return acc;
}

ConditionalLaw conditional_law(const Matrix& sigma, std::span<const double> schedule) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw DimensionMismatch("conditional_law: covariance must be square and non-empty");
  }
  const Eigen::Index m = sigma.rows() - 1;
  ConditionalLaw law;
  double schur = sigma(m, m);
  if (m == 0) {
    law.weights = Vector(0);
  } else {
    const Matrix s11 = sigma.topLeftCorner(m, m);
    const Vector s12 = sigma.col(m).head(m);
    CholeskyFactor chol = cholesky_spd(s11, schedule);
    law.jitter = chol.jitter;
    const auto lower = chol.lower.triangularView<Eigen::Lower>();
    Vector y = lower.solve(s12);
    law.weights = chol.lower.transpose().triangularView<Eigen::Upper>().solve(y);
    schur -= y.squaredNorm();
  }
  if (schur < -kSchurClampTolerance) {
    throw NotPositiveDefinite("conditional_law: negative Schur complement " + std::to_string(schur));
  }
  law.std = std::sqrt(std::max(schur, 0.0));
  return law;
}

ConditionalMoments conditional_gaussian(const Matrix& sigma, std::span<const double> prev) {
  if (static_cast<Eigen::Index>(prev.size()) + 1 != sigma.rows()) {
    throw DimensionMismatch("conditional_gaussian: prev must have length dim(sigma) - 1");
  }
  ConditionalLaw law = conditional_law(sigma);
  return {law.mean(prev), law.std};
}

}  // namespace nfd
