#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nfd/data.hpp"

namespace nfd {

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;

/// One raw CIFAR-10 binary record: label byte then channel-major pixels.
struct CifarRecord {
  std::uint8_t label = 0;
  std::vector<std::uint8_t> pixels;  // kCifarPixels bytes
};

/// Reads up to max_records raw records (all when max_records <= 0).
/// FormatError if the file size is not a multiple of 3073 or a label exceeds 9.
std::vector<CifarRecord> cifar10_read_raw(const std::filesystem::path& path, int max_records = 0);

void cifar10_write_raw(const std::filesystem::path& path, const std::vector<CifarRecord>& records);

/// Pixels scaled to [0, 1], optionally average-pooled to `downsample_to_d`
/// features (3*m*m with m dividing 32), then standardized per feature over the
/// loaded subset. Labels: class 0 -> +1, other classes -> -1.
Dataset cifar10_read(const std::filesystem::path& path, int max_records,
                     std::optional<int> downsample_to_d = std::nullopt);

Dataset cifar10_dataset(const std::vector<CifarRecord>& records, std::optional<int> downsample_to_d);

}  // namespace nfd
