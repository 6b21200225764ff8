#pragma once

#include <functional>
#include <vector>

namespace nfd {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch rules. Legendre on [-1, 1]; Laguerre for weight e^{-s} on
/// [0, inf); Hermite for the standard normal density (probabilists').
QuadratureRule gauss_legendre(int order);
QuadratureRule gauss_laguerre(int order);
QuadratureRule gauss_hermite_normal(int order);

/// E[f(u, v)] for standard normals with correlation rho.
///
/// Integrates in polar coordinates of the whitened pair (z1, z2), with
/// u = z1 and v = rho*z1 + sqrt(1-rho^2)*z2: Gauss-Laguerre in s = r^2/2 and
/// composite Gauss-Legendre in the angle, with panel breaks on the lines
/// u = 0 and v = 0. Integrands whose kinks sit on those lines (relu, abs,
/// step products) are smooth on every panel, so the rule converges
/// spectrally for them; positively homogeneous integrands are exact in s.
double bivariate_gauss_expectation(const std::function<double(double, double)>& f, double rho,
                                   int quadrature_order);

}  // namespace nfd
