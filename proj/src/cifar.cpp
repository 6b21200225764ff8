#include "nfd/cifar.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "nfd/errors.hpp"

namespace nfd {

std::vector<CifarRecord> cifar10_read_raw(const std::filesystem::path& path, int max_records) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cifar10_read: cannot stat " + path.string() + ": " + ec.message());
  if (size % kCifarRecordBytes != 0) {
    throw FormatError("cifar10_read: " + path.string() + " has " + std::to_string(size) +
                      " bytes, not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cifar10_read: cannot open " + path.string());
  std::size_t count = size / kCifarRecordBytes;
  if (max_records > 0) count = std::min<std::size_t>(count, static_cast<std::size_t>(max_records));

  std::vector<CifarRecord> records(count);
  std::vector<char> buffer(kCifarRecordBytes);
  for (std::size_t r = 0; r < count; ++r) {
    if (!in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()))) {
      throw IoError("cifar10_read: short read at record " + std::to_string(r));
    }
    const auto label = static_cast<std::uint8_t>(buffer[0]);
    if (label > 9) {
      throw FormatError("cifar10_read: record " + std::to_string(r) + " has label byte " +
                        std::to_string(label));
    }
    records[r].label = label;
    records[r].pixels.assign(reinterpret_cast<const std::uint8_t*>(buffer.data()) + 1,
                             reinterpret_cast<const std::uint8_t*>(buffer.data()) + kCifarRecordBytes);
  }
  return records;
}

void cifar10_write_raw(const std::filesystem::path& path, const std::vector<CifarRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cifar10_write: cannot open " + path.string());
  for (const auto& rec : records) {
    if (rec.pixels.size() != kCifarPixels) throw FormatError("cifar10_write: record has wrong pixel count");
    out.put(static_cast<char>(rec.label));
    out.write(reinterpret_cast<const char*>(rec.pixels.data()), static_cast<std::streamsize>(kCifarPixels));
  }
  if (!out) throw IoError("cifar10_write: write failed for " + path.string());
}

Dataset cifar10_dataset(const std::vector<CifarRecord>& records, std::optional<int> downsample_to_d) {
  if (records.empty()) throw EmptyDataset("cifar10: no records loaded");
  int side = 32;
  if (downsample_to_d) {
    const int d = *downsample_to_d;
    int m = static_cast<int>(std::lround(std::sqrt(d / 3.0)));
    if (d <= 0 || 3 * m * m != d || 32 % m != 0) {
      throw ConfigError("cifar10: downsample_to_d must be 3*m*m with m dividing 32, got " + std::to_string(d));
    }
    side = m;
  }
  const int pool = 32 / side;
  const int dim = 3 * side * side;
  const double scale = 1.0 / (255.0 * pool * pool);

  Dataset ds;
  ds.provenance = Provenance::cifar10;
  ds.target_encoding = "one_vs_rest(class 0 -> +1, other -> -1)";
  ds.inputs = Matrix::Zero(static_cast<Eigen::Index>(records.size()), dim);
  ds.labels.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& px = records[r].pixels;
    for (int c = 0; c < 3; ++c) {
      for (int row = 0; row < 32; ++row) {
        for (int col = 0; col < 32; ++col) {
          const int feature = c * side * side + (row / pool) * side + (col / pool);
          ds.inputs(static_cast<Eigen::Index>(r), feature) += px[c * 1024 + row * 32 + col] * scale;
        }
      }
    }
    ds.labels[static_cast<Eigen::Index>(r)] = records[r].label == 0 ? 1.0 : -1.0;
  }
  const double count = static_cast<double>(records.size());
  for (int j = 0; j < dim; ++j) {
    auto column = ds.inputs.col(j);
    const double mean = column.sum() / count;
    column.array() -= mean;
    const double sd = std::sqrt(column.squaredNorm() / count);
    if (sd > 0.0) column /= sd;
  }
  return ds;
}

Dataset cifar10_read(const std::filesystem::path& path, int max_records, std::optional<int> downsample_to_d) {
  return cifar10_dataset(cifar10_read_raw(path, max_records), downsample_to_d);
}

}  // namespace nfd
