#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace nfd {

enum class ActivationKind { relu, identity, tanh };

/// Pointwise nonlinearity with its derivative and Lipschitz constants.
/// relu'(0) is taken to be 0.
struct Activation {
  ActivationKind kind = ActivationKind::relu;

  double value(double x) const;
  double derivative(double x) const;
  /// Lipschitz constant of the activation itself.
  double lipschitz() const;
  /// Lipschitz constant of the derivative; empty when the derivative jumps.
  std::optional<double> derivative_lipschitz() const;

  std::string_view name() const;
  static Activation parse(std::string_view name);
};

}  // namespace nfd
