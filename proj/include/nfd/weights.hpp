#pragma once

#include <cstddef>
#include <vector>

#include "nfd/linalg.hpp"
#include "nfd/rng.hpp"

namespace nfd {

enum class Precision { float64, float32 };

/// Dense row-major matrix of initial Gaussian weights. Storage can be single
/// precision to fit wide, deep networks in memory; products always
/// accumulate in double.
class InitMatrix {
 public:
  InitMatrix() = default;
  InitMatrix(int rows, int cols, Precision precision);

  static InitMatrix sample(Rng& rng, int rows, int cols, Precision precision);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  Precision precision() const noexcept { return precision_; }

  double at(int i, int j) const;
  void set(int i, int j, double value);

  /// y = W x
  Vector apply(const Vector& x) const;
  /// y = W^T x
  Vector apply_transpose(const Vector& x) const;

  Matrix to_dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  Precision precision_ = Precision::float64;
  std::vector<double> d_;
  std::vector<float> f_;
};

/// Cumulative SGD update Delta W kept as a sum of rank-one terms
/// scale * a b^T, folded into a dense matrix once that is cheaper.
class UpdateMatrix {
 public:
  UpdateMatrix() = default;
  UpdateMatrix(int rows, int cols) : rows_(rows), cols_(cols) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  bool is_zero() const noexcept { return left_.empty() && dense_.size() == 0; }
  std::size_t rank_terms() const noexcept { return left_.size(); }

  void add_rank_one(double scale, const Vector& a, const Vector& b);

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& x) const;

  double at(int i, int j) const;
  Matrix to_dense() const;

 private:
  void fold();

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Vector> left_;   // already multiplied by scale
  std::vector<Vector> right_;
  Matrix dense_;
};

}  // namespace nfd
