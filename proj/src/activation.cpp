#include "nfd/activation.hpp"

#include <cmath>

#include "nfd/errors.hpp"

namespace nfd {

double Activation::value(double x) const {
  switch (kind) {
    case ActivationKind::relu:
      return x > 0.0 ? x : 0.0;
    case ActivationKind::identity:
      return x;
    case ActivationKind::tanh:
      return std::tanh(x);
  }
  return x;
}

double Activation::derivative(double x) const {
  switch (kind) {
    case ActivationKind::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::identity:
      return 1.0;
    case ActivationKind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

double Activation::lipschitz() const { return 1.0; }

std::optional<double> Activation::derivative_lipschitz() const {
  switch (kind) {
    case ActivationKind::relu:
      return std::nullopt;
    case ActivationKind::identity:
      return 0.0;
    case ActivationKind::tanh:
      // max |tanh''| attained at tanh(x) = 1/sqrt(3)
      return 4.0 / (3.0 * std::sqrt(3.0));
  }
  return std::nullopt;
}

std::string_view Activation::name() const {
  switch (kind) {
    case ActivationKind::relu:
      return "relu";
    case ActivationKind::identity:
      return "identity";
    case ActivationKind::tanh:
      return "tanh";
  }
  return "?";
}

Activation Activation::parse(std::string_view name) {
  if (name == "relu") return {ActivationKind::relu};
  if (name == "identity") return {ActivationKind::identity};
  if (name == "tanh") return {ActivationKind::tanh};
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu, identity or tanh)");
}

}  // namespace nfd
