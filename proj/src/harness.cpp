#include "nfd/harness.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include "nfd/errors.hpp"
#include "nfd/experiments.hpp"

namespace nfd {

std::vector<ResultRecord> run(ExperimentSpec spec, const RunOptions& options) {
  if (options.seed) spec.seeds = {static_cast<std::int64_t>(*options.seed)};
  validate(spec);
  Grid grid = make_grid(spec, options.figure_scale);

  std::optional<CsvWriter> writer;
  std::filesystem::path out_path = options.out ? *options.out : std::filesystem::path(spec.output);
  if (!out_path.empty()) writer.emplace(out_path, spec.schema_version, config_hash(spec));

  const std::size_t count = grid.points.size();
  std::vector<std::vector<ResultRecord>> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::vector<ResultRecord> all;
  const unsigned workers = std::max(1u, options.workers);

  // Waves of `workers` points; rows are written in grid order after each wave.
  for (std::size_t begin = 0; begin < count; begin += workers) {
    const std::size_t end = std::min(count, begin + workers);
    auto work = [&](std::size_t i) {
      try {
        results[i] = grid.points[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    if (end - begin == 1) {
      work(begin);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = begin; i < end; ++i) pool.emplace_back(work, i);
      for (auto& t : pool) t.join();
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      if (writer) writer->append(results[i]);
      all.insert(all.end(), results[i].begin(), results[i].end());
    }
  }
  if (grid.summarize) {
    auto summary = grid.summarize(all);
    if (writer) writer->append(summary);
    all.insert(all.end(), summary.begin(), summary.end());
  }
  return all;
}

SlopeFit slope_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("slope_fit: x and y differ in length");
  const std::size_t m = x.size();
  if (m < 3) throw DomainError("slope_fit: need at least 3 points");
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("slope_fit: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw DomainError("slope_fit: x values are all equal");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    rss += r * r;
  }
  fit.stderr_slope = std::sqrt(rss / (m - 2) / sxx);
  return fit;
}

SlopeFit slope_fit(const std::vector<ResultRecord>& records, const std::string& x_key, const std::string& y_key) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (r.metric != y_key) continue;
    std::optional<double> xv;
    if (x_key == "n" && r.n) xv = static_cast<double>(*r.n);
    else if (x_key == "L" && r.L) xv = static_cast<double>(*r.L);
    else if (x_key == "T" && r.T) xv = *r.T;
    else if (x_key == "eta_c" && r.eta_c) xv = *r.eta_c;
    else if (x_key == "k" && r.k) xv = static_cast<double>(*r.k);
    else if (x_key == "t" && r.t) xv = *r.t;
    else if (x_key == "seed" && r.seed) xv = static_cast<double>(*r.seed);
    else if (x_key != "n" && x_key != "L" && x_key != "T" && x_key != "eta_c" && x_key != "k" && x_key != "t" &&
             x_key != "seed") {
      throw ConfigError("slope_fit: unknown coordinate '" + x_key + "'");
    }
    if (!xv) continue;
    x.push_back(*xv);
    y.push_back(r.value);
  }
  return slope_fit(x, y);
}

}  // namespace nfd
