#include "nfd/limit_sim.hpp"

#include <cmath>
#include <string>

#include "nfd/errors.hpp"
#include "nfd/parallel.hpp"

namespace nfd {

namespace {

constexpr std::size_t kReductionChunks = 64;
constexpr double kSpdViolationTolerance = 1e-9;

enum Channel : std::uint64_t { kInitFeature = 1, kReadout = 2, kForwardNoise = 3, kBackwardNoise = 4 };

Rng noise_stream(const Rng& base, Channel channel, int t, int k) {
  const std::uint64_t id = derive_stream(derive_stream(derive_stream(base.stream_id(), channel), t), k);
  return Rng(base.seed(), id);
}

/// Particle means of m products, with a fixed chunking so the result does
/// not depend on the worker count. term(p, acc) adds particle p's m values.
template <class Term>
std::vector<double> particle_means(int particles, int m, unsigned workers, Term&& term) {
  std::vector<double> partial(kReductionChunks * m, 0.0);
  for_each_chunk(static_cast<std::size_t>(particles), kReductionChunks, workers,
                 [&](std::size_t c, std::size_t begin, std::size_t end) {
                   double* acc = partial.data() + c * m;
                   for (std::size_t p = begin; p < end; ++p) term(static_cast<int>(p), acc);
                 });
  std::vector<double> out(m, 0.0);
  for (std::size_t c = 0; c < kReductionChunks; ++c) {
    for (int j = 0; j < m; ++j) out[j] += partial[c * m + j];
  }
  for (double& v : out) v /= particles;
  return out;
}

template <class Body>
void particle_loop(int particles, unsigned workers, Body&& body) {
  for_each_chunk(static_cast<std::size_t>(particles), kReductionChunks, workers,
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   for (std::size_t p = begin; p < end; ++p) body(static_cast<int>(p));
                 });
}

/// Grows the (k+1) x (k+1) matrix from the frozen k x k block and a new row.
Matrix extend(const Matrix* previous, const std::vector<double>& row) {
  const int k = static_cast<int>(row.size()) - 1;
  Matrix m(k + 1, k + 1);
  if (k > 0) m.topLeftCorner(k, k) = *previous;
  for (int i = 0; i <= k; ++i) {
    m(i, k) = row[i];
    m(k, i) = row[i];
  }
  return m;
}

class Simulator {
 public:
  Simulator(const LimitConfig& cfg, const std::vector<Sample>& samples, const Rng& rng)
      : cfg_(cfg), samples_(samples), rng_(rng), L_(cfg.steps_L), K_(cfg.k_max + 1), P_(cfg.particles),
        tau_(cfg.tau()) {
    run_.cfg = cfg;
    run_.ensemble.h = Trajectory(L_ + 1, K_, P_);
    run_.ensemble.g = Trajectory(L_ + 1, K_, P_);
    run_.ledger.dw = Trajectory(L_, K_, P_);
    run_.ledger.dw_tilde = Trajectory(L_, K_, P_);
    run_.cov.sigma.assign(L_ + 1, {});
    run_.cov.theta.assign(L_ + 1, {});
    run_.cov.sigma_min.assign(L_ + 1, {});
    run_.cov.theta_min.assign(L_ + 1, {});
    dphi_.assign(L_ + 1, {});
  }

  LimitRun run() {
    input_factor();
    readout_.resize(P_);
    {
      const Rng r = noise_stream(rng_, kReadout, 0, 0);
      for (int p = 0; p < P_; ++p) readout_[p] = r.normal_at(p);
    }
    for (int k = 0; k < K_; ++k) {
      forward(k);
      backward(k);
      finish(k);
      run_.ledger.iterations_recorded = k + 1;
    }
    return std::move(run_);
  }

 private:
  void input_factor() {
    const int d = static_cast<int>(samples_[0].x.size());
    Matrix gram(K_, K_);
    for (int i = 0; i < K_; ++i) {
      if (samples_[i].x.size() != d) throw DimensionMismatch("simulate_training: samples differ in dimension");
      for (int j = 0; j < K_; ++j) gram(i, j) = samples_[i].x.dot(samples_[j].x) / d;
    }
    try {
      CholeskyFactor chol = cholesky_spd(gram);
      input_chol_ = chol.lower;
      if (chol.jitter > 0.0) {
        run_.jitter_events.push_back({JitterEvent::Source::input_gram, 0, K_ - 1, chol.jitter});
      }
    } catch (const NotPositiveDefinite& e) {
      throw SpdViolation(std::string("input Gram: ") + e.what(), 0, K_ - 1);
    }
    input_gram_ = gram;
    init_normals_.resize(K_);
    for (int j = 0; j < K_; ++j) {
      const Rng r = noise_stream(rng_, kInitFeature, 0, j);
      init_normals_[j].resize(P_);
      for (int p = 0; p < P_; ++p) init_normals_[j][p] = r.normal_at(p);
    }
  }

  double phi(double x) const { return cfg_.activation.value(x); }
  double dphi(double x) const { return cfg_.activation.derivative(x); }

  ConditionalLaw law_for(const Matrix& cov, bool forward, int t, int k) {
    const double lmin = min_symmetric_eigenvalue(cov);
    auto& mins = forward ? run_.cov.sigma_min[t] : run_.cov.theta_min[t];
    mins.push_back(lmin);
    if (lmin < cfg_.spd_floor) run_.spd_flags.push_back({forward, t, k, lmin});
    ConditionalLaw law;
    try {
      law = conditional_law(cov);
    } catch (const NotPositiveDefinite& e) {
      throw SpdViolation(std::string(forward ? "Sigma" : "Theta") + " at t=" + std::to_string(t) +
                             ", k=" + std::to_string(k) + ": " + e.what(),
                         t, k);
    }
    if (lmin + law.jitter < -kSpdViolationTolerance) {
      throw SpdViolation(std::string(forward ? "Sigma" : "Theta") + " indefinite at t=" + std::to_string(t) +
                             ", k=" + std::to_string(k) + " (min eigenvalue " + std::to_string(lmin) + ")",
                         t, k);
    }
    if (law.jitter > 0.0) {
      run_.jitter_events.push_back(
          {forward ? JitterEvent::Source::forward : JitterEvent::Source::backward, t, k, law.jitter});
    }
    return law;
  }

  /// E[phi(h_t^i) phi(h_t^k)] and E[phi'(h_t^i) phi'(h_t^k)] for i = 0..k.
  void forward_moments(int t, int k, std::vector<double>& s, std::vector<double>& dd) {
    const Trajectory& h = run_.ensemble.h;
    const int m = k + 1;
    const bool need_d = cfg_.correction_term && k > 0;
    auto means = particle_means(P_, need_d ? 2 * m : m, cfg_.workers, [&](int p, double* acc) {
      const double hk = h.at(t, k, p);
      const double fk = phi(hk);
      const double dk = need_d ? dphi(hk) : 0.0;
      for (int i = 0; i < m; ++i) {
        const double hi = h.at(t, i, p);
        acc[i] += phi(hi) * fk;
        if (need_d) acc[m + i] += dphi(hi) * dk;
      }
    });
    s.assign(means.begin(), means.begin() + m);
    dd.assign(m, 0.0);
    if (need_d) std::copy(means.begin() + m, means.end(), dd.begin());
  }

  void record_sigma(int t, int k, const std::vector<double>& s) {
    auto& series = run_.cov.sigma[t];
    series.push_back(extend(k > 0 ? &series[k - 1] : nullptr, s));
  }

  void forward(int k) {
    Trajectory& h = run_.ensemble.h;
    const Trajectory& g = run_.ensemble.g;
    const double eta = cfg_.eta_c;
    const auto& lp = run_.loss_derivs;

    {
      double* h0 = h.row(0, k);
      std::vector<double> coef(k);
      for (int i = 0; i < k; ++i) coef[i] = eta * lp[i] * input_gram_(i, k);
      particle_loop(P_, cfg_.workers, [&](int p) {
        double value = 0.0;
        for (int j = 0; j <= k; ++j) value += input_chol_(k, j) * init_normals_[j][p];
        for (int i = 0; i < k; ++i) value -= coef[i] * g.at(0, i, p);
        h0[p] = value;
      });
    }

    const double sqrt_tau = std::sqrt(tau_);
    std::vector<double> s, dd;
    for (int l = 1; l <= L_; ++l) {
      const int t = l - 1;
      forward_moments(t, k, s, dd);
      record_sigma(t, k, s);
      dphi_[t] = dd;
      const ConditionalLaw law = law_for(run_.cov.sigma[t][k], true, t, k);

      std::vector<double> a(k);
      for (int i = 0; i < k; ++i) {
        double c = s[i];
        if (cfg_.correction_term && l >= 2) c += tau_ * run_.cov.sigma[t - 1][k](i, k) * dd[i];
        a[i] = tau_ * eta * lp[i] * c;
      }
      const Rng noise = noise_stream(rng_, kForwardNoise, t, k);
      const double* prev = h.row(t, k);
      double* next = h.row(l, k);
      double* dw = run_.ledger.dw.row(t, k);
      const auto& ledger = run_.ledger.dw;
      particle_loop(P_, cfg_.workers, [&](int p) {
        double increment = sqrt_tau * law.std * noise.normal_at(p);
        for (int j = 0; j < k; ++j) increment += law.weights[j] * ledger.at(t, j, p);
        dw[p] = increment;
        double value = prev[p] + increment;
        for (int i = 0; i < k; ++i) value -= a[i] * g.at(l, i, p);
        next[p] = value;
      });
    }
    forward_moments(L_, k, s, dd);
    record_sigma(L_, k, s);
    dphi_[L_] = dd;
    const double lmin = min_symmetric_eigenvalue(run_.cov.sigma[L_][k]);
    run_.cov.sigma_min[L_].push_back(lmin);
    if (lmin < cfg_.spd_floor) run_.spd_flags.push_back({true, L_, k, lmin});
  }

  std::vector<double> backward_moments(int t, int k) {
    const Trajectory& g = run_.ensemble.g;
    const int m = k + 1;
    return particle_means(P_, m, cfg_.workers, [&](int p, double* acc) {
      const double gk = g.at(t, k, p);
      for (int i = 0; i < m; ++i) acc[i] += g.at(t, i, p) * gk;
    });
  }

  void record_theta(int t, int k, const std::vector<double>& th) {
    auto& series = run_.cov.theta[t];
    series.push_back(extend(k > 0 ? &series[k - 1] : nullptr, th));
  }

  void backward(int k) {
    const Trajectory& h = run_.ensemble.h;
    Trajectory& g = run_.ensemble.g;
    const double eta = cfg_.eta_c;
    const auto& lp = run_.loss_derivs;

    {
      double* gL = g.row(L_, k);
      particle_loop(P_, cfg_.workers, [&](int p) {
        double value = readout_[p];
        for (int i = 0; i < k; ++i) value -= eta * lp[i] * h.at(L_, i, p);
        gL[p] = value;
      });
    }

    const double sqrt_tau = std::sqrt(tau_);
    for (int l = L_; l >= 1; --l) {
      const std::vector<double> th = backward_moments(l, k);
      record_theta(l, k, th);
      const ConditionalLaw law = law_for(run_.cov.theta[l][k], false, l, k);

      std::vector<double> b(k);
      for (int i = 0; i < k; ++i) {
        double c = th[i];
        if (cfg_.correction_term && l <= L_ - 1) c += tau_ * run_.cov.theta[l + 1][k](i, k) * dphi_[l][i];
        b[i] = tau_ * eta * lp[i] * c;
      }
      const int t = l - 1;
      const Rng noise = noise_stream(rng_, kBackwardNoise, t, k);
      const double* upper = g.row(l, k);
      double* lower = g.row(t, k);
      double* dwt = run_.ledger.dw_tilde.row(t, k);
      const auto& ledger = run_.ledger.dw_tilde;
      particle_loop(P_, cfg_.workers, [&](int p) {
        double increment = sqrt_tau * law.std * noise.normal_at(p);
        for (int j = 0; j < k; ++j) increment += law.weights[j] * ledger.at(t, j, p);
        dwt[p] = increment;
        double inner = increment;
        for (int i = 0; i < k; ++i) inner -= b[i] * phi(h.at(t, i, p));
        lower[p] = upper[p] + dphi(h.at(t, k, p)) * inner;
      });
    }
    const std::vector<double> th = backward_moments(0, k);
    record_theta(0, k, th);
    const double lmin = min_symmetric_eigenvalue(run_.cov.theta[0][k]);
    run_.cov.theta_min[0].push_back(lmin);
    if (lmin < cfg_.spd_floor) run_.spd_flags.push_back({false, 0, k, lmin});
  }

  void finish(int k) {
    const Trajectory& h = run_.ensemble.h;
    const Trajectory& g = run_.ensemble.g;
    auto moments = particle_means(P_, 2, cfg_.workers, [&](int p, double* acc) {
      const double v = g.at(L_, k, p) * h.at(L_, k, p);
      acc[0] += v;
      acc[1] += v * v;
    });
    const double mean = moments[0];
    const double var = std::max(0.0, moments[1] - mean * mean) * P_ / std::max(1, P_ - 1);
    run_.outputs.push_back(mean);
    run_.output_se.push_back(std::sqrt(var / P_));
    run_.loss_derivs.push_back(loss_and_deriv(cfg_.loss, mean, samples_[k].y).derivative);
  }

  const LimitConfig& cfg_;
  const std::vector<Sample>& samples_;
  Rng rng_;
  int L_;
  int K_;
  int P_;
  double tau_;
  LimitRun run_;
  Matrix input_chol_;
  Matrix input_gram_;
  std::vector<std::vector<double>> init_normals_;
  std::vector<double> readout_;
  std::vector<std::vector<double>> dphi_;  // [t][i] for the current iteration
};

}  // namespace

void validate(const LimitConfig& cfg) {
  if (cfg.steps_L < 1) throw ConfigError("steps_L must be >= 1");
  if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw ConfigError("T must be a positive finite number");
  if (cfg.particles < 2) throw ConfigError("particles must be >= 2");
  if (cfg.k_max < 0) throw ConfigError("k_max must be >= 0");
  if (!std::isfinite(cfg.eta_c)) throw ConfigError("eta_c must be finite");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
}

LimitRun simulate_training(const LimitConfig& cfg, const std::vector<Sample>& samples, const Rng& rng) {
  validate(cfg);
  if (static_cast<int>(samples.size()) < cfg.k_max + 1) {
    throw ConfigError("simulate_training: need k_max + 1 = " + std::to_string(cfg.k_max + 1) + " samples, got " +
                      std::to_string(samples.size()));
  }
  Simulator sim(cfg, samples, rng);
  return sim.run();
}

double limit_output(const LimitRun& run, int k) {
  if (k < 0 || k >= static_cast<int>(run.outputs.size())) {
    throw IndexError("limit_output: iteration " + std::to_string(k) + " outside 0.." +
                     std::to_string(static_cast<int>(run.outputs.size()) - 1));
  }
  return run.outputs[k];
}

std::vector<CorrectionGapPoint> correction_gap(const LimitConfig& cfg, const std::vector<Sample>& samples,
                                               const Rng& rng, const std::vector<int>& steps) {
  std::vector<CorrectionGapPoint> out;
  for (int s : steps) {
    LimitConfig on = cfg;
    on.steps_L = s;
    on.correction_term = true;
    LimitConfig off = on;
    off.correction_term = false;
    const double f_on = simulate_training(on, samples, rng).outputs.back();
    const double f_off = simulate_training(off, samples, rng).outputs.back();
    out.push_back({s, std::abs(f_on - f_off), f_on, f_off});
  }
  return out;
}

std::vector<CovarianceMinimum> covariance_minima(const LimitRun& run) {
  std::vector<CovarianceMinimum> out;
  const auto& cov = run.cov;
  for (std::size_t t = 0; t < cov.sigma_min.size(); ++t) {
    for (std::size_t k = 0; k < cov.sigma_min[t].size(); ++k) {
      const double theta = k < cov.theta_min[t].size() ? cov.theta_min[t][k] : std::nan("");
      out.push_back({static_cast<int>(t), static_cast<int>(k), cov.sigma_min[t][k], theta});
    }
  }
  return out;
}

}  // namespace nfd
