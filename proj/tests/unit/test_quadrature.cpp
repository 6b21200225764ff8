#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nfd/quadrature.hpp"

using namespace nfd;

TEST_CASE("gauss rules integrate polynomials") {
  const QuadratureRule leg = gauss_legendre(8);
  double s = 0.0;
  for (std::size_t i = 0; i < leg.nodes.size(); ++i) s += leg.weights[i] * std::pow(leg.nodes[i], 14);
  CHECK(s == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
  const QuadratureRule lag = gauss_laguerre(10);
  double m = 0.0;
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) m += lag.weights[i] * std::pow(lag.nodes[i], 5);
  CHECK(m == doctest::Approx(120.0).epsilon(1e-11));
  const QuadratureRule her = gauss_hermite_normal(12);
  double m4 = 0.0, total = 0.0;
  for (std::size_t i = 0; i < her.nodes.size(); ++i) {
    m4 += her.weights[i] * std::pow(her.nodes[i], 4);
    total += her.weights[i];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("bivariate gaussian expectations") {
  auto relu = [](double z) { return std::max(z, 0.0); };
  CHECK(bivariate_gauss_expectation([](double u, double v) { return u * v; }, 0.3, 32) ==
        doctest::Approx(0.3).epsilon(1e-12));
  const double r0 = bivariate_gauss_expectation([&](double u, double v) { return relu(u) * relu(v); }, 0.0, 64);
  CHECK(std::abs(r0 - 1.0 / (2.0 * std::numbers::pi)) < 1e-9);
  const double r1 = bivariate_gauss_expectation([&](double u, double v) { return relu(u) * relu(v); }, 1.0, 64);
  CHECK(std::abs(r1 - 0.5) < 1e-9);
  // arc-cosine kernel of order one
  const double rho = -0.45;
  const double arc = (std::sqrt(1 - rho * rho) + rho * (std::numbers::pi - std::acos(rho))) / (2 * std::numbers::pi);
  const double rr = bivariate_gauss_expectation([&](double u, double v) { return relu(u) * relu(v); }, rho, 64);
  CHECK(std::abs(rr - arc) < 1e-9);
}
