#include "nfd/data.hpp"

#include <cmath>
#include <cstdlib>

#include "nfd/errors.hpp"

namespace nfd {

Matrix sphere_inputs(Rng& rng, int count, int dim) {
  if (count < 1 || dim < 1) throw DimensionMismatch("sphere_inputs: count and dim must be >= 1");
  Matrix x = sample_std_normal_matrix(rng, count, dim);
  const double radius = std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < count; ++i) {
    double norm = x.row(i).norm();
    while (norm == 0.0) {  // measure zero, but keep the row on the sphere
      for (int j = 0; j < dim; ++j) x(i, j) = rng.normal();
      norm = x.row(i).norm();
    }
    if (dim == 1) {
      x(i, 0) = x(i, 0) > 0.0 ? 1.0 : -1.0;
    } else {
      x.row(i) *= radius / norm;
    }
  }
  return x;
}

TeacherKind parse_teacher(std::string_view name) {
  if (name == "linear") return TeacherKind::linear;
  if (name == "narrow_resnet") return TeacherKind::narrow_resnet;
  throw ConfigError("unknown teacher '" + std::string(name) + "' (expected linear or narrow_resnet)");
}

namespace {

// Width-8, depth-2 pre-activation tanh ResNet with fixed random weights.
Vector narrow_resnet_outputs(const Matrix& inputs, Rng& rng) {
  constexpr int width = 8;
  constexpr int depth = 2;
  const int d = static_cast<int>(inputs.cols());
  const Matrix u = sample_std_normal_matrix(rng, width, d);
  std::vector<Matrix> w;
  for (int l = 0; l < depth; ++l) w.push_back(sample_std_normal_matrix(rng, width, width));
  const Vector v = sample_std_normal_vector(rng, width);
  const double branch = std::sqrt(1.0 / (depth * width));
  Vector out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    Vector h = u * inputs.row(i).transpose() / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < depth; ++l) h += branch * (w[l] * h.array().tanh().matrix());
    out[i] = v.dot(h) / std::sqrt(static_cast<double>(width));
  }
  return out;
}

}  // namespace

Vector teacher_labels(const Matrix& inputs, Rng& rng, TeacherKind teacher, double noise_std) {
  if (inputs.rows() < 1) throw EmptyDataset("teacher_labels: no inputs");
  Vector y;
  if (teacher == TeacherKind::linear) {
    const Vector w = sample_std_normal_vector(rng, static_cast<int>(inputs.cols()));
    y = inputs * w / std::sqrt(static_cast<double>(inputs.cols()));
  } else {
    y = narrow_resnet_outputs(inputs, rng);
  }
  if (y.size() > 1) {
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size());
    if (var > 0.0) y /= std::sqrt(var);
  }
  if (noise_std > 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise_std * rng.normal();
  }
  return y;
}

LossKind parse_loss(std::string_view name) {
  if (name == "mse") return LossKind::mse;
  if (name == "logistic") return LossKind::logistic;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected mse or logistic)");
}

LossValue loss_and_deriv(LossKind kind, double f, double y) {
  if (kind == LossKind::mse) {
    const double r = f - y;
    return {0.5 * r * r, r};
  }
  if (y != 1.0 && y != -1.0) throw DomainError("logistic loss needs labels in {-1, +1}");
  const double m = y * f;
  // log(1 + e^{-m}) evaluated without overflow
  const double value = m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  const double deriv = -y / (1.0 + std::exp(m));
  return {value, deriv};
}

double loss_derivative_lipschitz(LossKind kind) { return kind == LossKind::mse ? 1.0 : 0.25; }

OnlineSampler::OnlineSampler(const Dataset& dataset, Rng rng) : dataset_(&dataset), rng_(rng) {
  if (dataset.size() == 0) throw EmptyDataset("online_sampler: dataset has no samples");
}

int OnlineSampler::next_index() {
  // Lemire-style multiply-shift; bias is < 2^-32 for any realistic N
  const auto n = static_cast<std::uint64_t>(dataset_->size());
  const unsigned __int128 product = static_cast<unsigned __int128>(rng_.next_u64()) * n;
  return static_cast<int>(product >> 64);
}

Sample OnlineSampler::next() {
  const int i = next_index();
  return {dataset_->inputs.row(i).transpose(), dataset_->labels[i]};
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("NFDLAB_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return "data";
}

}  // namespace nfd
