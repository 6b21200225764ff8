#include "nfd/weights.hpp"

#include "nfd/errors.hpp"

namespace nfd {

InitMatrix::InitMatrix(int rows, int cols, Precision precision)
    : rows_(rows), cols_(cols), precision_(precision) {
  if (rows < 1 || cols < 1) throw DimensionMismatch("InitMatrix: rows and cols must be >= 1");
  const auto count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (precision == Precision::float64) {
    d_.assign(count, 0.0);
  } else {
    f_.assign(count, 0.0f);
  }
}

InitMatrix InitMatrix::sample(Rng& rng, int rows, int cols, Precision precision) {
  InitMatrix m(rows, cols, precision);
  if (precision == Precision::float64) {
    for (double& e : m.d_) e = rng.normal();
  } else {
    for (float& e : m.f_) e = static_cast<float>(rng.normal());
  }
  return m;
}

double InitMatrix::at(int i, int j) const {
  if (i < 0 || j < 0 || i >= rows_ || j >= cols_) throw IndexError("InitMatrix::at: index out of range");
  const auto k = static_cast<std::size_t>(i) * cols_ + j;
  return precision_ == Precision::float64 ? d_[k] : f_[k];
}

void InitMatrix::set(int i, int j, double value) {
  if (i < 0 || j < 0 || i >= rows_ || j >= cols_) throw IndexError("InitMatrix::set: index out of range");
  const auto k = static_cast<std::size_t>(i) * cols_ + j;
  if (precision_ == Precision::float64) {
    d_[k] = value;
  } else {
    f_[k] = static_cast<float>(value);
  }
}

namespace {

template <class T>
void gemv(const T* w, int rows, int cols, const double* x, double* y) {
  for (int i = 0; i < rows; ++i) {
    const T* row = w + static_cast<std::size_t>(i) * cols;
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    int j = 0;
    for (; j + 4 <= cols; j += 4) {
      acc0 += static_cast<double>(row[j]) * x[j];
      acc1 += static_cast<double>(row[j + 1]) * x[j + 1];
      acc2 += static_cast<double>(row[j + 2]) * x[j + 2];
      acc3 += static_cast<double>(row[j + 3]) * x[j + 3];
    }
    for (; j < cols; ++j) acc0 += static_cast<double>(row[j]) * x[j];
    y[i] = (acc0 + acc1) + (acc2 + acc3);
  }
}

template <class T>
void gemv_t(const T* w, int rows, int cols, const double* x, double* y) {
  for (int j = 0; j < cols; ++j) y[j] = 0.0;
  for (int i = 0; i < rows; ++i) {
    const T* row = w + static_cast<std::size_t>(i) * cols;
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (int j = 0; j < cols; ++j) y[j] += static_cast<double>(row[j]) * xi;
  }
}

}  // namespace

Vector InitMatrix::apply(const Vector& x) const {
  if (x.size() != cols_) throw DimensionMismatch("InitMatrix::apply: size mismatch");
  Vector y(rows_);
  if (precision_ == Precision::float64) {
    gemv(d_.data(), rows_, cols_, x.data(), y.data());
  } else {
    gemv(f_.data(), rows_, cols_, x.data(), y.data());
  }
  return y;
}

Vector InitMatrix::apply_transpose(const Vector& x) const {
  if (x.size() != rows_) throw DimensionMismatch("InitMatrix::apply_transpose: size mismatch");
  Vector y(cols_);
  if (precision_ == Precision::float64) {
    gemv_t(d_.data(), rows_, cols_, x.data(), y.data());
  } else {
    gemv_t(f_.data(), rows_, cols_, x.data(), y.data());
  }
  return y;
}

Matrix InitMatrix::to_dense() const {
  Matrix m(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) m(i, j) = at(i, j);
  }
  return m;
}

void UpdateMatrix::add_rank_one(double scale, const Vector& a, const Vector& b) {
  if (a.size() != rows_ || b.size() != cols_) throw DimensionMismatch("UpdateMatrix: rank-one size mismatch");
  if (scale == 0.0) return;
  left_.push_back(scale * a);
  right_.push_back(b);
  if (2 * left_.size() >= static_cast<std::size_t>(std::min(rows_, cols_))) fold();
}

void UpdateMatrix::fold() {
  if (dense_.size() == 0) dense_ = Matrix::Zero(rows_, cols_);
  for (std::size_t r = 0; r < left_.size(); ++r) dense_.noalias() += left_[r] * right_[r].transpose();
  left_.clear();
  right_.clear();
}

Vector UpdateMatrix::apply(const Vector& x) const {
  if (x.size() != cols_) throw DimensionMismatch("UpdateMatrix::apply: size mismatch");
  Vector y = dense_.size() != 0 ? Vector(dense_ * x) : Vector::Zero(rows_);
  for (std::size_t r = 0; r < left_.size(); ++r) y += right_[r].dot(x) * left_[r];
  return y;
}

Vector UpdateMatrix::apply_transpose(const Vector& x) const {
  if (x.size() != rows_) throw DimensionMismatch("UpdateMatrix::apply_transpose: size mismatch");
  Vector y = dense_.size() != 0 ? Vector(dense_.transpose() * x) : Vector::Zero(cols_);
  for (std::size_t r = 0; r < left_.size(); ++r) y += left_[r].dot(x) * right_[r];
  return y;
}

double UpdateMatrix::at(int i, int j) const {
  double value = dense_.size() != 0 ? dense_(i, j) : 0.0;
  for (std::size_t r = 0; r < left_.size(); ++r) value += left_[r][i] * right_[r][j];
  return value;
}

Matrix UpdateMatrix::to_dense() const {
  Matrix m = dense_.size() != 0 ? dense_ : Matrix::Zero(rows_, cols_);
  for (std::size_t r = 0; r < left_.size(); ++r) m.noalias() += left_[r] * right_[r].transpose();
  return m;
}

}  // namespace nfd
