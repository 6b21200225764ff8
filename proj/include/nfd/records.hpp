#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace nfd {

/// One tidy row: a single metric value plus the grid coordinates it
/// belongs to. Unset coordinates are written as empty cells.
struct ResultRecord {
  std::string experiment;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> n;
  std::optional<std::int64_t> L;
  std::optional<double> T;
  std::optional<double> eta_c;
  std::optional<std::int64_t> k;
  std::optional<double> t;
  std::string variant;
  std::string metric;
  double value = 0.0;
};

std::string csv_header();
std::string csv_row(const ResultRecord& r, int schema_version, const std::string& config_hash);

/// Appends rows and flushes after each batch.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, int schema_version, std::string config_hash);

  void append(const std::vector<ResultRecord>& rows);

 private:
  std::ofstream out_;
  int schema_version_;
  std::string hash_;
};

std::vector<ResultRecord> read_records_csv(const std::filesystem::path& path);

/// Shortest round-trip formatting.
std::string format_number(double v);

/// Records whose metric (and variant, if given) match.
std::vector<ResultRecord> select(const std::vector<ResultRecord>& rows, const std::string& metric,
                                 const std::optional<std::string>& variant = std::nullopt);

}  // namespace nfd
