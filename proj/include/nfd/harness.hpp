#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfd/config.hpp"
#include "nfd/records.hpp"

namespace nfd {

struct RunOptions {
  std::optional<std::uint64_t> seed;  // replaces the spec's seed list
  std::optional<std::filesystem::path> out;
  unsigned workers = 1;
  bool figure_scale = false;
};

/// Runs every grid point of the spec, up to `workers` at a time, and
/// appends rows to the CSV in grid order, flushing after each point. On a
/// failure the rows of completed points are already on disk.
std::vector<ResultRecord> run(ExperimentSpec spec, const RunOptions& options = {});

struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
};

/// Least squares of log y on log x. DomainError for fewer than 3 points or
/// non-positive values.
SlopeFit slope_fit(const std::vector<double>& x, const std::vector<double>& y);

/// x_key names a coordinate column (n, L, T, eta_c, k, t, seed); y_key a
/// metric. Rows without the coordinate are ignored.
SlopeFit slope_fit(const std::vector<ResultRecord>& records, const std::string& x_key, const std::string& y_key);

}  // namespace nfd
