#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "nfd/linalg.hpp"
#include "nfd/rng.hpp"

namespace nfd {

enum class Provenance { synthetic_teacher, synthetic_gaussian, cifar10 };

struct Dataset {
  Matrix inputs;  // N x d, one sample per row
  Vector labels;  // N
  Provenance provenance = Provenance::synthetic_gaussian;
  std::string target_encoding;  // free-form note carried into run metadata

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

struct Sample {
  Vector x;
  double y = 0.0;
};

/// Rows i.i.d. uniform on the sphere of radius sqrt(d).
Matrix sphere_inputs(Rng& rng, int count, int dim);

enum class TeacherKind { linear, narrow_resnet };

TeacherKind parse_teacher(std::string_view name);

/// Teacher outputs are rescaled to unit empirical variance (no centering)
/// before the label noise is added.
Vector teacher_labels(const Matrix& inputs, Rng& rng, TeacherKind teacher, double noise_std);

enum class LossKind { mse, logistic };

LossKind parse_loss(std::string_view name);

struct LossValue {
  double value;
  double derivative;  // d loss / d f
};

/// mse: (f-y)^2/2 with derivative f-y; logistic (y in {-1, +1}):
/// log(1 + e^{-yf}) with derivative -y / (1 + e^{yf}).
LossValue loss_and_deriv(LossKind kind, double f, double y);

/// Lipschitz constant of the loss derivative in f.
double loss_derivative_lipschitz(LossKind kind);

/// I.i.d. uniform-with-replacement draws from a dataset.
class OnlineSampler {
 public:
  OnlineSampler(const Dataset& dataset, Rng rng);

  Sample next();
  int next_index();

 private:
  const Dataset* dataset_;
  Rng rng_;
};

/// Directory for cached datasets: $NFDLAB_DATA_DIR, else ./data.
std::filesystem::path data_dir();

}  // namespace nfd
