#include <doctest.h>

#include "nfd/errors.hpp"
#include "nfd/weights.hpp"

using namespace nfd;

TEST_CASE("init matrix products match dense algebra") {
  for (Precision p : {Precision::float64, Precision::float32}) {
    Rng r(2, 3);
    const InitMatrix w = InitMatrix::sample(r, 37, 29, p);
    const Matrix d = w.to_dense();
    Rng q(4, 5);
    const Vector x = sample_std_normal_vector(q, 29);
    const Vector y = sample_std_normal_vector(q, 37);
    CHECK((w.apply(x) - d * x).norm() < 1e-12 * (1.0 + (d * x).norm()));
    CHECK((w.apply_transpose(y) - d.transpose() * y).norm() < 1e-12 * (1.0 + y.norm() * d.norm()));
    CHECK(w.at(3, 4) == d(3, 4));
  }
}

TEST_CASE("float32 storage rounds the double draw") {
  Rng a(6, 7), b(6, 7);
  const InitMatrix wd = InitMatrix::sample(a, 8, 8, Precision::float64);
  const InitMatrix wf = InitMatrix::sample(b, 8, 8, Precision::float32);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(wf.at(i, j) == static_cast<double>(static_cast<float>(wd.at(i, j))));
  }
}

TEST_CASE("init matrix bounds") {
  InitMatrix w(2, 3, Precision::float64);
  w.set(1, 2, 4.5);
  CHECK(w.at(1, 2) == 4.5);
  CHECK_THROWS_AS(w.at(2, 0), IndexError);
  CHECK_THROWS_AS(w.set(0, 3, 1.0), IndexError);
}

TEST_CASE("update matrix accumulates rank one terms and folds") {
  const int n = 6;
  UpdateMatrix u(n, n);
  CHECK(u.is_zero());
  Matrix ref = Matrix::Zero(n, n);
  Rng r(8, 9);
  u.add_rank_one(0.0, Vector::Ones(n), Vector::Ones(n));
  CHECK(u.is_zero());
  for (int k = 0; k < 7; ++k) {
    const Vector a = sample_std_normal_vector(r, n), b = sample_std_normal_vector(r, n);
    const double s = 0.3 * (k + 1);
    u.add_rank_one(s, a, b);
    ref += s * a * b.transpose();
    CHECK((u.to_dense() - ref).norm() < 1e-12 * ref.norm());
    const Vector x = sample_std_normal_vector(r, n);
    CHECK((u.apply(x) - ref * x).norm() < 1e-12 * (1.0 + (ref * x).norm()));
    CHECK((u.apply_transpose(x) - ref.transpose() * x).norm() < 1e-12 * (1.0 + (ref * x).norm()));
    CHECK(u.at(1, 2) == doctest::Approx(ref(1, 2)));
    CHECK(2 * u.rank_terms() < static_cast<std::size_t>(n));
  }
}
