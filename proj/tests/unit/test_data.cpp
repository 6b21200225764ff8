#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "nfd/cifar.hpp"
#include "nfd/data.hpp"
#include "nfd/errors.hpp"

using namespace nfd;

TEST_CASE("sphere inputs") {
  Rng r(1, 2);
  const Matrix one = sphere_inputs(r, 50, 1);
  for (int i = 0; i < one.rows(); ++i) CHECK(std::abs(one(i, 0)) == 1.0);
  const Matrix x = sphere_inputs(r, 10000, 8);
  for (int i = 0; i < x.rows(); ++i) CHECK(std::abs(x.row(i).squaredNorm() / 8.0 - 1.0) < 1e-12);
  const double mean_norm = x.colwise().mean().norm();
  CHECK(mean_norm <= 4.0 * std::sqrt(8.0 / 10000.0));
}

TEST_CASE("teacher labels") {
  Rng r(3, 4);
  const Matrix x = sphere_inputs(r, 64, 8);
  Rng a(5, 6), b(5, 6);
  const Vector y1 = teacher_labels(x, a, TeacherKind::linear, 0.0);
  const Vector y2 = teacher_labels(x, b, TeacherKind::linear, 0.0);
  CHECK(y1 == y2);
  Matrix both(2, 8);
  both.row(0) = x.row(0);
  both.row(1) = -x.row(0);
  Rng c(5, 6);
  const Vector odd = teacher_labels(both, c, TeacherKind::linear, 0.0);
  CHECK(odd[1] == doctest::Approx(-odd[0]));

  Rng big(7, 8), t(9, 10);
  const Matrix xb = sphere_inputs(big, 10000, 8);
  const Vector yb = teacher_labels(xb, t, TeacherKind::narrow_resnet, 0.0);
  const double var = (yb.array() - yb.mean()).square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  CHECK_THROWS_AS(parse_teacher("wide"), ConfigError);
}

TEST_CASE("losses") {
  const LossValue z = loss_and_deriv(LossKind::mse, 1.3, 1.3);
  CHECK(z.value == 0.0);
  CHECK(z.derivative == 0.0);
  const LossValue m = loss_and_deriv(LossKind::mse, 2.0, 0.0);
  CHECK(m.value == 2.0);
  CHECK(m.derivative == 2.0);
  const LossValue l = loss_and_deriv(LossKind::logistic, 0.0, 1.0);
  CHECK(l.value == doctest::Approx(std::log(2.0)));
  CHECK(l.derivative == doctest::Approx(-0.5));
  const LossValue far = loss_and_deriv(LossKind::logistic, -800.0, 1.0);
  CHECK(std::isfinite(far.value));
  CHECK(far.derivative == doctest::Approx(-1.0));
  CHECK_THROWS_AS(loss_and_deriv(LossKind::logistic, 0.0, 0.5), DomainError);
  CHECK(loss_derivative_lipschitz(LossKind::mse) == 1.0);
  CHECK(loss_derivative_lipschitz(LossKind::logistic) == 0.25);
}

TEST_CASE("online sampler") {
  Dataset one;
  one.inputs = Matrix::Ones(1, 3);
  one.labels = Vector::Constant(1, 0.5);
  OnlineSampler s(one, Rng(1, 1));
  for (int i = 0; i < 10; ++i) CHECK(s.next().y == 0.5);

  Dataset ten;
  ten.inputs = Matrix::Zero(10, 2);
  ten.labels = Vector::Zero(10);
  OnlineSampler a(ten, Rng(4, 4)), b(ten, Rng(4, 4));
  for (int i = 0; i < 100; ++i) CHECK(a.next_index() == b.next_index());
  std::vector<int> counts(10, 0);
  OnlineSampler c(ten, Rng(8, 8));
  const int N = 100000;
  for (int i = 0; i < N; ++i) ++counts[c.next_index()];
  for (int k = 0; k < 10; ++k) CHECK(std::abs(counts[k] / static_cast<double>(N) - 0.1) <= 4.0 * std::sqrt(0.09 / N));

  Dataset empty;
  CHECK_THROWS_AS(OnlineSampler(empty, Rng(1, 1)), EmptyDataset);
}

namespace {

std::vector<CifarRecord> fake_records(int count) {
  std::vector<CifarRecord> out;
  Rng r(77, 1);
  for (int i = 0; i < count; ++i) {
    CifarRecord rec;
    rec.label = static_cast<std::uint8_t>(i % 10);
    rec.pixels.resize(kCifarPixels);
    for (auto& p : rec.pixels) p = static_cast<std::uint8_t>(r.next_u64() & 0xFF);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

TEST_CASE("cifar binary round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "nfdlab_cifar_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "batch.bin";
  const auto recs = fake_records(200);
  cifar10_write_raw(path, recs);
  CHECK(std::filesystem::file_size(path) == 200 * kCifarRecordBytes);
  const auto back = cifar10_read_raw(path);
  REQUIRE(back.size() == 200);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == recs[i].label);
    CHECK(back[i].pixels == recs[i].pixels);
  }
  CHECK(cifar10_read_raw(path, 17).size() == 17);

  const Dataset ds = cifar10_read(path, 128, 48);
  CHECK(ds.size() == 128);
  CHECK(ds.dim() == 48);
  CHECK(ds.provenance == Provenance::cifar10);
  for (int j = 0; j < ds.dim(); ++j) CHECK(std::abs(ds.inputs.col(j).mean()) <= 1e-10);
  for (int i = 0; i < ds.size(); ++i) CHECK(ds.labels[i] == (recs[i].label == 0 ? 1.0 : -1.0));
  CHECK_THROWS_AS(cifar10_read(path, 16, 47), ConfigError);

  std::ofstream(dir / "short.bin", std::ios::binary) << "abc";
  CHECK_THROWS_AS(cifar10_read_raw(dir / "short.bin"), FormatError);
  auto bad = fake_records(1);
  bad[0].label = 12;
  cifar10_write_raw(dir / "badlabel.bin", bad);
  CHECK_THROWS_AS(cifar10_read_raw(dir / "badlabel.bin"), FormatError);
  CHECK_THROWS_AS(cifar10_read_raw(dir / "missing.bin"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("full cifar batch when present") {
  const auto path = data_dir() / "data_batch_1.bin";
  if (!std::filesystem::exists(path)) return;
  CHECK(std::filesystem::file_size(path) == 30730000u);
  CHECK(cifar10_read_raw(path).size() == 10000);
}

TEST_CASE("data dir from environment") {
  setenv("NFDLAB_DATA_DIR", "/tmp/somewhere", 1);
  CHECK(data_dir() == std::filesystem::path("/tmp/somewhere"));
  unsetenv("NFDLAB_DATA_DIR");
  CHECK(data_dir() == std::filesystem::path("data"));
}
