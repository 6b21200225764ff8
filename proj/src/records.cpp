#include "nfd/records.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "nfd/errors.hpp"

namespace nfd {

namespace {

std::string cell(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : std::string(); }
std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("records: bad number '" + s + "'");
  return v;
}

std::optional<std::int64_t> opt_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stoll(s);
}

std::optional<double> opt_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return to_double(s);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_header() { return "schema_version,config_hash,experiment,seed,n,L,T,eta_c,k,t,variant,metric,value"; }

std::string csv_row(const ResultRecord& r, int schema_version, const std::string& config_hash) {
  std::string out = std::to_string(schema_version) + "," + config_hash + "," + escape(r.experiment) + ",";
  out += cell(r.seed) + "," + cell(r.n) + "," + cell(r.L) + "," + cell(r.T) + "," + cell(r.eta_c) + ",";
  out += cell(r.k) + "," + cell(r.t) + "," + escape(r.variant) + "," + escape(r.metric) + ",";
  out += format_number(r.value);
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, int schema_version, std::string config_hash)
    : out_(path, std::ios::binary | std::ios::trunc), schema_version_(schema_version), hash_(std::move(config_hash)) {
  if (!out_) throw IoError("cannot open output " + path.string());
  out_ << csv_header() << '\n';
  out_.flush();
}

void CsvWriter::append(const std::vector<ResultRecord>& rows) {
  for (const auto& r : rows) out_ << csv_row(r, schema_version_, hash_) << '\n';
  out_.flush();
  if (!out_) throw IoError("write to results CSV failed");
}

std::vector<ResultRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw FormatError("records: unexpected header in " + path.string());
  std::vector<ResultRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 13) throw FormatError("records: expected 13 columns, got " + std::to_string(c.size()));
    ResultRecord r;
    r.experiment = c[2];
    r.seed = opt_int(c[3]);
    r.n = opt_int(c[4]);
    r.L = opt_int(c[5]);
    r.T = opt_double(c[6]);
    r.eta_c = opt_double(c[7]);
    r.k = opt_int(c[8]);
    r.t = opt_double(c[9]);
    r.variant = c[10];
    r.metric = c[11];
    r.value = to_double(c[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRecord> select(const std::vector<ResultRecord>& rows, const std::string& metric,
                                 const std::optional<std::string>& variant) {
  std::vector<ResultRecord> out;
  for (const auto& r : rows) {
    if (r.metric == metric && (!variant || r.variant == *variant)) out.push_back(r);
  }
  return out;
}

}  // namespace nfd
