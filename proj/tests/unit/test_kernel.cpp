#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "nfd/errors.hpp"
#include "nfd/experiments.hpp"
#include "nfd/kernel.hpp"

using namespace nfd;

namespace {

KernelConfig cfg_for(const Matrix& inputs, ActivationKind act, double T, int steps, int particles) {
  KernelConfig kc;
  kc.T = T;
  kc.steps = steps;
  kc.particles = particles;
  kc.activation = Activation{act};
  kc.inputs = inputs;
  return kc;
}

Matrix sphere(int m, int d, std::uint64_t seed) {
  Rng r(seed, 31);
  return sphere_inputs(r, m, d);
}

}  // namespace

TEST_CASE("empty horizon gives the input gram") {
  const Matrix x = sphere(5, 6, 1);
  const GramMatrix g = nngp_gram(cfg_for(x, ActivationKind::relu, 0.0, 8, 500), Rng(1, 1));
  CHECK(g.values == input_gram(x));
}

TEST_CASE("identity kernel follows the covariance recursion") {
  const Matrix x = sphere(4, 6, 2);
  const auto kc = cfg_for(x, ActivationKind::identity, 1.0, 32, 40000);
  const GramMatrix g = nngp_gram(kc, Rng(2, 2));
  const Matrix expect = std::pow(1.0 + 1.0 / 32, 32) * input_gram(x);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(std::abs(g.values(i, j) - expect(i, j)) <= 3.0 * g.se(i, j) + 1e-12);
  }
  CHECK(g.values == g.values.transpose());
  for (int i = 0; i < 4; ++i) CHECK(g.values(i, i) >= input_gram(x)(i, i));
}

TEST_CASE("relu kernel slope at orthogonal inputs") {
  Matrix x = Matrix::Zero(2, 4);
  x(0, 0) = 2.0;
  x(1, 1) = 2.0;
  const double T = 0.05;
  const GramMatrix g = nngp_gram(cfg_for(x, ActivationKind::relu, T, 16, 100000), Rng(3, 3));
  CHECK(std::abs(g.values(0, 1) - T / (2.0 * std::numbers::pi)) <= 3.0 * g.se(0, 1) + T * T);
}

TEST_CASE("minimum eigenvalue") {
  Matrix one(1, 3);
  one << 1.0, 1.0, 1.0;
  const GramMatrix g = nngp_gram(cfg_for(one, ActivationKind::identity, 1.0, 64, 20000), Rng(4, 4));
  CHECK(spd_min_eig(g) > 0.0);
  CHECK(spd_min_eig(g) == doctest::Approx(std::exp(1.0)).epsilon(0.05));
  Matrix dup(2, 3);
  dup.row(0) = sphere(1, 3, 5).row(0);
  dup.row(1) = dup.row(0);
  const GramMatrix gd = nngp_gram(cfg_for(dup, ActivationKind::relu, 1.0, 16, 5000), Rng(5, 5));
  CHECK(std::abs(spd_min_eig(gd)) <= 3.0 * gd.max_se() + 1e-9);
  const Matrix sixteen = sphere(16, 8, 6);
  const GramMatrix gs = nngp_gram(cfg_for(sixteen, ActivationKind::relu, 1.0, 32, 100000), Rng(6, 6));
  CHECK(spd_min_eig(gs) > 0.0);
  CHECK(spd_min_eig(gs) >= min_symmetric_eigenvalue(input_gram(sixteen)) - 3.0 * 16 * gs.max_se());
}

TEST_CASE("nesting gap") {
  const Matrix x = sphere(6, 4, 7);
  const auto kc = cfg_for(x, ActivationKind::identity, 1.0, 64, 20000);
  CHECK(nesting_gap(x, 0.5, 0.5, kc, Rng(7, 7)).gap == 0.0);
  CHECK_THROWS_AS(nesting_gap(x, 0.0, 0.5, kc, Rng(7, 7)), DomainError);
  CHECK_THROWS_AS(nesting_gap(x, 0.8, 0.5, kc, Rng(7, 7)), DomainError);
  const NestingGap ng = nesting_gap(x, 0.5, 1.0, kc, Rng(8, 8));
  const double lam = min_symmetric_eigenvalue(input_gram(x));
  const double expect = (std::pow(1.0 + 1.0 / 64, 64) - std::pow(1.0 + 1.0 / 64, 32)) * lam;
  CHECK(std::abs(ng.gap - expect) <= 3.0 * 6 * ng.entry_se + 1e-9);
  const Matrix x32 = sphere(32, 8, 9);
  const NestingGap nr = nesting_gap(x32, 0.5, 2.0, cfg_for(x32, ActivationKind::relu, 2.0, 32, 20000), Rng(9, 9));
  CHECK(nr.gap >= -3.0 * 32 * nr.entry_se);
}

TEST_CASE("dual activations") {
  const Activation id{ActivationKind::identity}, relu{ActivationKind::relu};
  for (double rho : {-0.7, 0.0, 0.4, 1.0}) CHECK(dual_activation(rho, id) == doctest::Approx(rho));
  CHECK(std::abs(dual_activation(1.0, relu) - 0.5) < 1e-6);
  CHECK(std::abs(dual_activation(0.0, relu) - 1.0 / (2.0 * std::numbers::pi)) < 1e-6);
}

TEST_CASE("kernel ridge") {
  const Matrix I = Matrix::Identity(3, 3);
  Vector y(3);
  y << 1.0, -2.0, 0.5;
  CHECK(kernel_ridge(I, Vector::Zero(3), 0.1, I).norm() == 0.0);
  CHECK((kernel_ridge(I, y, 1.0, I) - y / 2.0).norm() < 1e-14);
  CHECK_THROWS_AS(kernel_ridge(I, y, 0.0, I), DomainError);
}

TEST_CASE("longer horizons fit a nonlinear teacher better") {
  const Dataset ds = synthetic_dataset(4, 96, 6, TeacherKind::narrow_resnet, 0.0);
  auto test_mse = [&](double T) {
    const GramMatrix g = nngp_gram(cfg_for(ds.inputs, ActivationKind::relu, T, 32, 20000), Rng(10, 10));
    const Vector pred =
        kernel_ridge(g.values.topLeftCorner(64, 64), ds.labels.head(64), 1e-3, g.values.bottomLeftCorner(32, 64));
    return (pred - ds.labels.tail(32)).squaredNorm() / 32.0;
  };
  CHECK(test_mse(1.0) <= test_mse(0.25));
}

TEST_CASE("gram csv round trip") {
  const Matrix x = sphere(3, 4, 11);
  const GramMatrix g = nngp_gram(cfg_for(x, ActivationKind::tanh, 1.0, 8, 1000), Rng(11, 11));
  const auto path = std::filesystem::temp_directory_path() / "nfdlab_gram.csv";
  write_gram_csv(path, g);
  const GramMatrix back = read_gram_csv(path);
  CHECK(back.values == g.values);
  CHECK(back.T == g.T);
  CHECK(back.particles == g.particles);
  CHECK(back.activation.kind == ActivationKind::tanh);
  std::filesystem::remove(path);
}
