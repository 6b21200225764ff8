#include "nfd/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nfd/errors.hpp"

namespace nfd {

namespace {

QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = diag.size();
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    jacobi(i, i) = diag[i];
    if (i + 1 < n) {
      jacobi(i, i + 1) = offdiag[i];
      jacobi(i + 1, i) = offdiag[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

void check_order(int order) {
  if (order < 1) throw DomainError("quadrature order must be >= 1");
}

}  // namespace

QuadratureRule gauss_legendre(int order) {
  check_order(order);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd off(std::max(order - 1, 0));
  for (int k = 1; k < order; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(diag, off, 2.0);
}

QuadratureRule gauss_laguerre(int order) {
  check_order(order);
  Eigen::VectorXd diag(order);
  Eigen::VectorXd off(std::max(order - 1, 0));
  for (int k = 0; k < order; ++k) diag[k] = 2.0 * k + 1.0;
  for (int k = 1; k < order; ++k) off[k - 1] = k;
  return golub_welsch(diag, off, 1.0);
}

QuadratureRule gauss_hermite_normal(int order) {
  check_order(order);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd off(std::max(order - 1, 0));
  for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  return golub_welsch(diag, off, 1.0);
}

double bivariate_gauss_expectation(const std::function<double(double, double)>& f, double rho,
                                   int quadrature_order) {
  if (!(std::abs(rho) <= 1.0)) throw DomainError("bivariate_gauss_expectation: |rho| must be <= 1");
  if (quadrature_order < 20) throw DomainError("bivariate_gauss_expectation: order must be >= 20");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  // v = rho*cos + s*sin = sin(theta + psi) vanishes at theta = -psi, pi - psi.
  const double psi = std::atan2(rho, s);
  std::vector<double> breaks{0.5 * std::numbers::pi, 1.5 * std::numbers::pi, -psi, std::numbers::pi - psi};
  for (double& b : breaks) {
    b = std::fmod(b, two_pi);
    if (b < 0) b += two_pi;
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               breaks.end());

  const QuadratureRule radial = gauss_laguerre(quadrature_order);
  const QuadratureRule angular = gauss_legendre(quadrature_order);

  double total = 0.0;
  for (std::size_t p = 0; p < breaks.size(); ++p) {
    const double lo = breaks[p];
    const double hi = (p + 1 < breaks.size()) ? breaks[p + 1] : breaks[0] + two_pi;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t a = 0; a < angular.nodes.size(); ++a) {
      const double theta = mid + half * angular.nodes[a];
      const double c = std::cos(theta);
      const double sn = std::sin(theta);
      double inner = 0.0;
      for (std::size_t r = 0; r < radial.nodes.size(); ++r) {
        const double radius = std::sqrt(2.0 * radial.nodes[r]);
        const double z1 = radius * c;
        const double z2 = radius * sn;
        inner += radial.weights[r] * f(z1, rho * z1 + s * z2);
      }
      total += half * angular.weights[a] * inner;
    }
  }
  return total / two_pi;
}

}  // namespace nfd
