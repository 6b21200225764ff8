#include "nfd/kernel.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "nfd/errors.hpp"
#include "nfd/parallel.hpp"
#include "nfd/quadrature.hpp"

namespace nfd {

namespace {

using ColMatrix = Eigen::MatrixXd;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError(where + ": not a number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Matrix input_gram(const Matrix& inputs) {
  if (inputs.rows() < 1 || inputs.cols() < 1) throw DimensionMismatch("input_gram: empty input set");
  const double d = static_cast<double>(inputs.cols());
  const auto m = inputs.rows();
  Matrix g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      g(i, j) = inputs.row(i).dot(inputs.row(j)) / d;
      g(j, i) = g(i, j);
    }
  }
  return g;
}

namespace {

struct Checkpoint {
  GramMatrix gram;
  std::vector<Matrix> batch;  // per-batch accumulated integral
  std::vector<double> weight;  // batch size / P
};

/// Batch-means standard error of sum_b weight_b * acc_b.
Matrix batch_se(const std::vector<Matrix>& acc, const std::vector<double>& weight) {
  const int B = static_cast<int>(acc.size());
  const auto M = acc.front().rows();
  Matrix mean = Matrix::Zero(M, M);
  for (int b = 0; b < B; ++b) mean += weight[b] * acc[b];
  Matrix ss = Matrix::Zero(M, M);
  for (int b = 0; b < B; ++b) ss.array() += (acc[b] - mean).array().square();
  return (ss / (static_cast<double>(B - 1) * B)).cwiseSqrt();
}

std::vector<Checkpoint> simulate_gram(const KernelConfig& cfg, const Rng& rng,
                                      const std::vector<double>& checkpoints) {
  if (cfg.steps < 1) throw ConfigError("kernel: steps must be >= 1");
  if (cfg.particles < 2) throw ConfigError("kernel: particles must be >= 2");
  if (cfg.T < 0.0 || !std::isfinite(cfg.T)) throw ConfigError("kernel: T must be finite and >= 0");
  const int M = static_cast<int>(cfg.inputs.rows());
  const int P = cfg.particles;
  const int B = std::max(2, std::min(cfg.batches, P));
  const double tau = cfg.T / cfg.steps;

  std::vector<int> stop_at;
  for (double c : checkpoints) {
    if (c < 0.0 || c > cfg.T * (1 + 1e-12)) throw DomainError("kernel: checkpoint outside [0, T]");
    stop_at.push_back(tau > 0.0 ? static_cast<int>(std::lround(c / tau)) : 0);
  }

  const Matrix gram0 = input_gram(cfg.inputs);
  double max_jitter = 0.0;

  ColMatrix H(P, M);
  {
    CholeskyFactor chol = cholesky_spd(gram0);
    max_jitter = chol.jitter;
    const Rng init(rng.seed(), derive_stream(rng.stream_id(), 0x1417));
    std::vector<double> z(M);
    for (int p = 0; p < P; ++p) {
      init.normals_at(static_cast<std::uint64_t>(p) * ((M + 1) / 2), z.data(), M);
      for (int i = 0; i < M; ++i) {
        double v = 0.0;
        for (int j = 0; j <= i; ++j) v += chol.lower(i, j) * z[j];
        H(p, i) = v;
      }
    }
  }

  auto batch_range = [&](int b) { return std::pair{static_cast<long>(P) * b / B, static_cast<long>(P) * (b + 1) / B}; };
  std::vector<Matrix> batch_acc(B, Matrix::Zero(M, M));  // sum over steps of tau * batch mean phi phi

  std::vector<double> weight(B);
  for (int b = 0; b < B; ++b) {
    auto [lo, hi] = batch_range(b);
    weight[b] = static_cast<double>(hi - lo) / P;
  }
  std::vector<Checkpoint> out(checkpoints.size());

  auto snapshot = [&](double t_value) {
    Checkpoint cp;
    GramMatrix& g = cp.gram;
    g.values = gram0;
    g.T = t_value;
    g.activation = cfg.activation;
    g.particles = P;
    g.seed = rng.seed();
    g.max_jitter = max_jitter;
    Matrix mean = Matrix::Zero(M, M);
    for (int b = 0; b < B; ++b) mean += weight[b] * batch_acc[b];
    for (int i = 0; i < M; ++i) {
      for (int j = i; j < M; ++j) {
        g.values(i, j) += mean(i, j);
        g.values(j, i) = g.values(i, j);
      }
    }
    g.se = batch_se(batch_acc, weight);
    cp.batch = batch_acc;
    cp.weight = weight;
    return cp;
  };
  auto emit = [&](int step) {
    for (std::size_t c = 0; c < stop_at.size(); ++c) {
      if (stop_at[c] == step) out[c] = snapshot(step * tau);
    }
  };

  emit(0);
  std::vector<Matrix> batch_cov(B);
  const double sqrt_tau = std::sqrt(tau);
  for (int s = 0; s < cfg.steps; ++s) {
    for_each_chunk(static_cast<std::size_t>(B), static_cast<std::size_t>(B), cfg.workers,
                   [&](std::size_t b, std::size_t, std::size_t) {
                     auto [lo, hi] = batch_range(static_cast<int>(b));
                     ColMatrix F = H.middleRows(lo, hi - lo).unaryExpr([&](double x) { return cfg.activation.value(x); });
                     Matrix S = Matrix::Zero(M, M);
                     S.selfadjointView<Eigen::Lower>().rankUpdate(F.transpose());
                     Matrix sym = S.selfadjointView<Eigen::Lower>();
                     batch_cov[b] = sym / static_cast<double>(hi - lo);
                   });
    Matrix sigma = Matrix::Zero(M, M);
    for (int b = 0; b < B; ++b) {
      sigma += batch_cov[b] * weight[b];
      batch_acc[b] += tau * batch_cov[b];
    }
    for (int i = 0; i < M; ++i) {
      for (int j = i + 1; j < M; ++j) sigma(j, i) = sigma(i, j);
    }
    CholeskyFactor chol;
    try {
      chol = cholesky_spd(sigma);
    } catch (const NotPositiveDefinite& e) {
      throw SpdViolation(std::string("nngp_gram: step covariance: ") + e.what(), s, 0);
    }
    max_jitter = std::max(max_jitter, chol.jitter);
    emit(s + 1);
    if (s + 1 == cfg.steps) break;
    const Rng noise(rng.seed(), derive_stream(derive_stream(rng.stream_id(), 0x5eed), s));
    for_each_chunk(static_cast<std::size_t>(B), static_cast<std::size_t>(B), cfg.workers,
                   [&](std::size_t b, std::size_t, std::size_t) {
                     auto [lo, hi] = batch_range(static_cast<int>(b));
                     std::vector<double> z(M);
                     for (long p = lo; p < hi; ++p) {
                       noise.normals_at(static_cast<std::uint64_t>(p) * ((M + 1) / 2), z.data(), M);
                       for (int i = 0; i < M; ++i) {
                         double v = 0.0;
                         for (int j = 0; j <= i; ++j) v += chol.lower(i, j) * z[j];
                         H(p, i) += sqrt_tau * v;
                       }
                     }
                   });
  }
  return out;
}

}  // namespace

std::vector<GramMatrix> nngp_gram_series(const KernelConfig& cfg, const Rng& rng,
                                         const std::vector<double>& checkpoints) {
  std::vector<GramMatrix> out;
  for (auto& cp : simulate_gram(cfg, rng, checkpoints)) out.push_back(std::move(cp.gram));
  return out;
}

GramMatrix nngp_gram(const KernelConfig& cfg, const Rng& rng) {
  return std::move(nngp_gram_series(cfg, rng, {cfg.T}).front());
}

double spd_min_eig(const GramMatrix& gram) { return min_symmetric_eigenvalue(gram.values); }

NestingGap nesting_gap(const Matrix& inputs, double t, double t_prime, const KernelConfig& cfg, const Rng& rng) {
  if (!(t > 0.0) || t > t_prime) throw DomainError("nesting_gap: need 0 < t <= t_prime");
  KernelConfig run = cfg;
  run.inputs = inputs;
  run.T = t_prime;
  const auto cps = simulate_gram(run, rng, {t, t_prime});
  const Matrix diff = cps[1].gram.values - cps[0].gram.values;
  std::vector<Matrix> batch_diff;
  for (std::size_t b = 0; b < cps[1].batch.size(); ++b) batch_diff.push_back(cps[1].batch[b] - cps[0].batch[b]);
  const double se = batch_se(batch_diff, cps[1].weight).maxCoeff();
  return {min_symmetric_eigenvalue(diff), se};
}

double dual_activation(double rho, const Activation& activation) {
  if (!(std::abs(rho) <= 1.0)) throw DomainError("dual_activation: |rho| must be <= 1");
  return bivariate_gauss_expectation(
      [&](double u, double v) { return activation.value(u) * activation.value(v); }, rho, 64);
}

Vector kernel_ridge(const Matrix& gram, const Vector& labels, double lambda, const Matrix& test_cross) {
  if (!(lambda > 0.0)) throw DomainError("kernel_ridge: lambda must be > 0");
  if (gram.rows() != gram.cols() || gram.rows() != labels.size() || test_cross.cols() != gram.rows()) {
    throw DimensionMismatch("kernel_ridge: Gram, labels and test_cross sizes disagree");
  }
  Matrix reg = gram;
  reg.diagonal().array() += lambda;
  const CholeskyFactor chol = cholesky_spd(reg, std::vector<double>{0.0});
  const auto lower = chol.lower.triangularView<Eigen::Lower>();
  const Vector alpha = chol.lower.transpose().triangularView<Eigen::Upper>().solve(Vector(lower.solve(labels)));
  return test_cross * alpha;
}

void write_gram_csv(const std::filesystem::path& path, const GramMatrix& gram) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_gram_csv: cannot open " + path.string());
  out << "# nngp T=" << format_double(gram.T) << " act=" << gram.activation.name() << " P=" << gram.particles
      << " seed=" << gram.seed << "\n";
  for (int i = 0; i < gram.size(); ++i) {
    for (int j = 0; j < gram.size(); ++j) {
      if (j) out << ',';
      out << format_double(gram.values(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write_gram_csv: write failed for " + path.string());
}

GramMatrix read_gram_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_gram_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# nngp ", 0) != 0) throw FormatError("read_gram_csv: missing header");
  GramMatrix g;
  std::istringstream header(line.substr(7));
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw FormatError("read_gram_csv: bad header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "T") {
      g.T = parse_double(value, "read_gram_csv header");
    } else if (key == "act") {
      g.activation = Activation::parse(value);
    } else if (key == "P") {
      g.particles = std::stoi(value);
    } else if (key == "seed") {
      g.seed = std::stoull(value);
    } else {
      throw FormatError("read_gram_csv: unknown header key '" + key + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      row.push_back(parse_double(std::string_view(line).substr(start, comma - start), "read_gram_csv"));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  g.values.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m) throw FormatError("read_gram_csv: matrix is not square");
    for (Eigen::Index j = 0; j < m; ++j) g.values(i, j) = rows[i][j];
  }
  g.se = Matrix::Zero(m, m);
  return g;
}

}  // namespace nfd
