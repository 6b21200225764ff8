#include "nfd/net.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "nfd/errors.hpp"

namespace nfd {

namespace {

std::uint64_t next_identity() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

Vector apply_phi(const Activation& act, const Vector& x) {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = act.value(x[i]);
  return y;
}

Vector apply_dphi(const Activation& act, const Vector& x) {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = act.derivative(x[i]);
  return y;
}

int matrices_per_block(BlockKind block) { return block == BlockKind::preact_two ? 2 : 1; }

Precision choose_precision(const NetConfig& cfg) {
  if (cfg.init_precision) return *cfg.init_precision;
  const double bytes = 8.0 * cfg.width * static_cast<double>(cfg.width) * cfg.depth *
                       matrices_per_block(cfg.block) *
                       (cfg.backward_mode == BackwardMode::decoupled ? 2.0 : 1.0);
  return bytes > static_cast<double>(kInitDoubleBudgetBytes) ? Precision::float32 : Precision::float64;
}

void check_trace(const NetParams& params, std::int64_t step, std::uint64_t identity, const char* where) {
  if (step != params.step || identity != params.identity) {
    throw TraceMismatch(std::string(where) + ": trace was produced by different parameters (trace step " +
                        std::to_string(step) + ", params step " + std::to_string(params.step) + ")");
  }
}

}  // namespace

AlphaMode parse_alpha_mode(std::string_view name) {
  if (name == "mup") return AlphaMode::mup;
  if (name == "ntk") return AlphaMode::ntk;
  throw ConfigError("unknown alpha_mode '" + std::string(name) + "' (expected mup or ntk)");
}

BlockKind parse_block(std::string_view name) {
  if (name == "preact_one") return BlockKind::preact_one;
  if (name == "postact_one") return BlockKind::postact_one;
  if (name == "preact_two") return BlockKind::preact_two;
  throw ConfigError("unknown block '" + std::string(name) + "' (expected preact_one, postact_one or preact_two)");
}

BackwardMode parse_backward_mode(std::string_view name) {
  if (name == "standard") return BackwardMode::standard;
  if (name == "decoupled") return BackwardMode::decoupled;
  throw ConfigError("unknown backward_mode '" + std::string(name) + "' (expected standard or decoupled)");
}

std::string_view block_name(BlockKind block) {
  switch (block) {
    case BlockKind::preact_one: return "preact_one";
    case BlockKind::postact_one: return "postact_one";
    case BlockKind::preact_two: return "preact_two";
  }
  return "?";
}

double NetConfig::alpha() const {
  return alpha_mode == AlphaMode::mup ? 1.0 / std::sqrt(static_cast<double>(width)) : 1.0;
}

double NetConfig::eta() const { return alpha_mode == AlphaMode::mup ? lr_base * width : lr_base; }

double NetConfig::branch_scale() const { return std::sqrt(T / (static_cast<double>(depth) * width)); }

void validate(const NetConfig& cfg) {
  if (cfg.width < 1) throw ConfigError("width must be >= 1");
  if (cfg.depth < 1) throw ConfigError("depth must be >= 1");
  if (cfg.input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw ConfigError("T must be a positive finite number");
  if (!std::isfinite(cfg.lr_base) || cfg.lr_base < 0.0) throw ConfigError("lr_base must be finite and >= 0");
  if (cfg.depth_aware_lr && cfg.block != BlockKind::preact_two) {
    throw ConfigError("depth_aware_lr applies only to block = preact_two");
  }
}

Vector Weight::forward(const Vector& x) const {
  Vector y = init.apply(x);
  if (!delta.is_zero()) y += delta.apply(x);
  return y;
}

Vector Weight::backward(const Vector& g, bool freeze_updates) const {
  if (backward_init) {
    Vector y = backward_init->apply_transpose(g);
    if (!freeze_updates && !delta.is_zero()) y += delta.apply_transpose(g);
    return y;
  }
  Vector y = init.apply_transpose(g);
  if (!delta.is_zero()) y += delta.apply_transpose(g);
  return y;
}

NetParams init_params(const NetConfig& cfg, Rng& rng) {
  validate(cfg);
  const int n = cfg.width;
  const Precision precision = choose_precision(cfg);
  const bool decoupled = cfg.backward_mode == BackwardMode::decoupled;
  Rng tilde_rng = split_rng(rng.seed(), derive_stream(rng.stream_id(), 0x7e57'dec0'0b1eULL));

  NetParams p;
  p.identity = next_identity();
  p.U = sample_std_normal_matrix(rng, n, cfg.input_dim);
  auto make = [&]() {
    Weight w{InitMatrix::sample(rng, n, n, precision), UpdateMatrix(n, n), std::nullopt};
    if (decoupled) w.backward_init = InitMatrix::sample(tilde_rng, n, n, precision);
    return w;
  };
  for (int l = 0; l < cfg.depth; ++l) {
    p.w1.push_back(make());
    if (cfg.block == BlockKind::preact_two) p.w2.push_back(make());
  }
  p.v = sample_std_normal_vector(rng, n);
  return p;
}

NetParams constant_params(const NetConfig& cfg, double value) {
  validate(cfg);
  const int n = cfg.width;
  const Precision precision = cfg.init_precision.value_or(Precision::float64);
  NetParams p;
  p.identity = next_identity();
  p.U = Matrix::Constant(n, cfg.input_dim, value);
  auto make = [&]() {
    Weight w{InitMatrix(n, n, precision), UpdateMatrix(n, n), std::nullopt};
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) w.init.set(i, j, value);
    }
    if (cfg.backward_mode == BackwardMode::decoupled) w.backward_init = w.init;
    return w;
  };
  for (int l = 0; l < cfg.depth; ++l) {
    p.w1.push_back(make());
    if (cfg.block == BlockKind::preact_two) p.w2.push_back(make());
  }
  p.v = Vector::Constant(n, value);
  return p;
}

ForwardTrace forward(const NetParams& params, const Vector& x, const NetConfig& cfg) {
  const int n = cfg.width;
  const int L = cfg.depth;
  if (x.size() != cfg.input_dim || params.U.cols() != cfg.input_dim || params.U.rows() != n ||
      static_cast<int>(params.w1.size()) != L || params.v.size() != n) {
    throw DimensionMismatch("forward: parameters or input do not match the configuration");
  }
  if (cfg.block == BlockKind::preact_two && static_cast<int>(params.w2.size()) != L) {
    throw DimensionMismatch("forward: preact_two needs two matrices per block");
  }
  const Activation& act = cfg.activation;
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  ForwardTrace tr;
  tr.x = x;
  tr.step = params.step;
  tr.identity = params.identity;
  tr.h.reserve(L + 1);
  const Vector a0 = params.U * x / std::sqrt(static_cast<double>(cfg.input_dim));

  switch (cfg.block) {
    case BlockKind::preact_one: {
      const double b = cfg.branch_scale();
      tr.h.push_back(a0);
      for (int l = 0; l < L; ++l) {
        const Vector& prev = tr.h.back();
        tr.h.push_back(prev + b * params.w1[l].forward(apply_phi(act, prev)));
      }
      break;
    }
    case BlockKind::postact_one: {
      const double b = std::sqrt(cfg.T / L);
      tr.a0 = a0;
      tr.h.push_back(apply_phi(act, a0));
      for (int l = 0; l < L; ++l) {
        const Vector& prev = tr.h.back();
        tr.x_internal.push_back(params.w1[l].forward(prev) / sqrt_n);
        tr.h.push_back(prev + b * apply_phi(act, tr.x_internal.back()));
      }
      break;
    }
    case BlockKind::preact_two: {
      const double b = 1.0 / std::sqrt(static_cast<double>(L) * n);
      tr.h.push_back(a0);
      for (int l = 0; l < L; ++l) {
        const Vector& prev = tr.h.back();
        tr.x_internal.push_back(params.w1[l].forward(prev) / sqrt_n);
        tr.h.push_back(prev + b * params.w2[l].forward(apply_phi(act, tr.x_internal.back())));
      }
      break;
    }
  }
  tr.f = cfg.alpha() / sqrt_n * params.v.dot(tr.h.back());
  return tr;
}

ForwardTrace forward_at_init(const NetConfig& cfg, Rng& rng, const Vector& x) {
  validate(cfg);
  if (x.size() != cfg.input_dim) throw DimensionMismatch("forward_at_init: input size does not match input_dim");
  const int n = cfg.width;
  const int L = cfg.depth;
  const Activation& act = cfg.activation;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const Precision precision = choose_precision(cfg);

  ForwardTrace tr;
  tr.x = x;
  const Matrix U = sample_std_normal_matrix(rng, n, cfg.input_dim);
  const Vector a0 = U * x / std::sqrt(static_cast<double>(cfg.input_dim));
  if (cfg.block == BlockKind::postact_one) {
    tr.a0 = a0;
    tr.h.push_back(apply_phi(act, a0));
  } else {
    tr.h.push_back(a0);
  }
  for (int l = 0; l < L; ++l) {
    const Vector prev = tr.h.back();
    const InitMatrix w1 = InitMatrix::sample(rng, n, n, precision);
    switch (cfg.block) {
      case BlockKind::preact_one:
        tr.h.push_back(prev + cfg.branch_scale() * w1.apply(apply_phi(act, prev)));
        break;
      case BlockKind::postact_one:
        tr.x_internal.push_back(w1.apply(prev) / sqrt_n);
        tr.h.push_back(prev + std::sqrt(cfg.T / L) * apply_phi(act, tr.x_internal.back()));
        break;
      case BlockKind::preact_two: {
        const InitMatrix w2 = InitMatrix::sample(rng, n, n, precision);
        tr.x_internal.push_back(w1.apply(prev) / sqrt_n);
        tr.h.push_back(prev + w2.apply(apply_phi(act, tr.x_internal.back())) / std::sqrt(static_cast<double>(L) * n));
        break;
      }
    }
  }
  const Vector v = sample_std_normal_vector(rng, n);
  tr.f = cfg.alpha() / sqrt_n * v.dot(tr.h.back());
  return tr;
}

BackwardTrace backward(const NetParams& params, const ForwardTrace& trace, const NetConfig& cfg) {
  check_trace(params, trace.step, trace.identity, "backward");
  const int n = cfg.width;
  const int L = cfg.depth;
  if (static_cast<int>(trace.h.size()) != L + 1) throw TraceMismatch("backward: trace depth does not match config");
  const Activation& act = cfg.activation;
  const bool freeze = cfg.decoupled_freeze_updates;
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  BackwardTrace bt;
  bt.step = params.step;
  bt.identity = params.identity;
  bt.g.assign(L + 1, Vector());
  bt.g[L] = params.v;
  for (int l = L; l >= 1; --l) {
    const Vector& g = bt.g[l];
    switch (cfg.block) {
      case BlockKind::preact_one: {
        const Vector back = params.w1[l - 1].backward(g, freeze);
        bt.g[l - 1] = g + cfg.branch_scale() * apply_dphi(act, trace.h[l - 1]).cwiseProduct(back);
        break;
      }
      case BlockKind::postact_one: {
        const Vector inner = apply_dphi(act, trace.x_internal[l - 1]).cwiseProduct(g);
        bt.g[l - 1] = g + std::sqrt(cfg.T / L) / sqrt_n * params.w1[l - 1].backward(inner, freeze);
        break;
      }
      case BlockKind::preact_two: {
        const Vector u =
            (params.w2[l - 1].backward(g, freeze) / sqrt_n).cwiseProduct(apply_dphi(act, trace.x_internal[l - 1]));
        bt.g[l - 1] = g + params.w1[l - 1].backward(u, freeze) / (sqrt_n * std::sqrt(static_cast<double>(L)));
        break;
      }
    }
  }
  return bt;
}

Gradients gradients(const NetParams& params, const ForwardTrace& trace, const BackwardTrace& btrace,
                    const NetConfig& cfg) {
  check_trace(params, trace.step, trace.identity, "gradients");
  check_trace(params, btrace.step, btrace.identity, "gradients");
  const int n = cfg.width;
  const int L = cfg.depth;
  const Activation& act = cfg.activation;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double a = cfg.alpha() / sqrt_n;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));

  Gradients gr;
  gr.v = a * trace.h[L];
  switch (cfg.block) {
    case BlockKind::preact_one:
      gr.u = {a * inv_sqrt_d, btrace.g[0], trace.x};
      for (int l = 1; l <= L; ++l) {
        gr.w1.push_back({a * cfg.branch_scale(), btrace.g[l], apply_phi(act, trace.h[l - 1])});
      }
      break;
    case BlockKind::postact_one: {
      gr.u = {a * inv_sqrt_d, apply_dphi(act, trace.a0).cwiseProduct(btrace.g[0]), trace.x};
      const double s = a * std::sqrt(cfg.T / L) / sqrt_n;
      for (int l = 1; l <= L; ++l) {
        gr.w1.push_back({s, apply_dphi(act, trace.x_internal[l - 1]).cwiseProduct(btrace.g[l]), trace.h[l - 1]});
      }
      break;
    }
    case BlockKind::preact_two: {
      gr.u = {a * inv_sqrt_d, btrace.g[0], trace.x};
      const double s = a / std::sqrt(static_cast<double>(L) * n);
      for (int l = 1; l <= L; ++l) {
        const Vector& xl = trace.x_internal[l - 1];
        const Vector u = (params.w2[l - 1].backward(btrace.g[l], cfg.decoupled_freeze_updates) / sqrt_n)
                             .cwiseProduct(apply_dphi(act, xl));
        gr.w1.push_back({s, u, trace.h[l - 1]});
        gr.w2.push_back({s, btrace.g[l], apply_phi(act, xl)});
      }
      break;
    }
  }
  return gr;
}

namespace {

struct Rates {
  double first;
  double second;
};

Rates rates(const NetConfig& cfg) {
  const double eta = cfg.eta();
  if (cfg.block == BlockKind::preact_two && cfg.depth_aware_lr) {
    return {eta * std::sqrt(static_cast<double>(cfg.depth)), eta};
  }
  return {eta, eta};
}

void apply_gradients(NetParams& params, const Gradients& gr, double coef, const NetConfig& cfg) {
  // coef multiplies the base rate: -loss_deriv (or its batch average share)
  if (coef == 0.0) return;
  const Rates r = rates(cfg);
  const double eta = cfg.eta();
  params.v += (eta * coef) * gr.v;
  params.U.noalias() += (eta * coef * gr.u.scale) * gr.u.left * gr.u.right.transpose();
  for (std::size_t l = 0; l < gr.w1.size(); ++l) {
    params.w1[l].delta.add_rank_one(r.first * coef * gr.w1[l].scale, gr.w1[l].left, gr.w1[l].right);
  }
  for (std::size_t l = 0; l < gr.w2.size(); ++l) {
    params.w2[l].delta.add_rank_one(r.second * coef * gr.w2[l].scale, gr.w2[l].left, gr.w2[l].right);
  }
}

}  // namespace

void sgd_step(NetParams& params, const ForwardTrace& trace, const BackwardTrace& btrace, double loss_deriv,
              const NetConfig& cfg) {
  const Gradients gr = gradients(params, trace, btrace, cfg);
  apply_gradients(params, gr, -loss_deriv, cfg);
  ++params.step;
}

void sgd_batch_step(NetParams& params, const std::vector<BatchItem>& batch, const NetConfig& cfg) {
  if (batch.empty()) throw EmptyDataset("sgd_batch_step: empty batch");
  std::vector<Gradients> grads;
  grads.reserve(batch.size());
  for (const auto& item : batch) grads.push_back(gradients(params, item.trace, item.btrace, cfg));
  const double share = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) apply_gradients(params, grads[b], -batch[b].loss_deriv * share, cfg);
  ++params.step;
}

TrainResult train(NetParams params, const NetConfig& cfg, OnlineSampler& sampler, int steps,
                  const TrainOptions& options) {
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (options.batch < 1) throw ConfigError("train: batch must be >= 1");
  TrainResult out;
  out.records.reserve(static_cast<std::size_t>(steps));
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.width));
  for (int k = 0; k < steps; ++k) {
    std::vector<BatchItem> batch;
    batch.reserve(static_cast<std::size_t>(options.batch));
    for (int b = 0; b < options.batch; ++b) {
      const Sample s = sampler.next();
      BatchItem item;
      item.trace = forward(params, s.x, cfg);
      item.btrace = backward(params, item.trace, cfg);
      const LossValue lv = loss_and_deriv(options.loss, item.trace.f, s.y);
      item.loss_deriv = lv.derivative;
      if (b == 0) {
        StepRecord rec;
        rec.k = params.step;
        rec.f = item.trace.f;
        rec.loss = lv.value;
        for (const auto& h : item.trace.h) rec.h_norms.push_back(h.norm() / sqrt_n);
        for (const auto& g : item.btrace.g) rec.g_norms.push_back(g.norm() / sqrt_n);
        out.records.push_back(std::move(rec));
      }
      batch.push_back(std::move(item));
    }
    if (options.batch == 1) {
      sgd_step(params, batch[0].trace, batch[0].btrace, batch[0].loss_deriv, cfg);
    } else {
      sgd_batch_step(params, batch, cfg);
    }
  }
  out.params = std::move(params);
  return out;
}

CollapseMetrics collapse_metrics(const NetParams& now, const NetParams& init, const ForwardTrace& trace,
                                 const NetConfig& cfg) {
  if (cfg.block != BlockKind::preact_two) throw ConfigError("collapse_metrics requires block = preact_two");
  check_trace(now, trace.step, trace.identity, "collapse_metrics");
  const int L = cfg.depth;
  const double n = cfg.width;
  const double sqrt_n = std::sqrt(n);
  const double rate_scale = std::sqrt(L / n);
  CollapseMetrics m;
  for (int l = 0; l < L; ++l) {
    const Vector& prev = trace.h[l];
    const Vector& xl = trace.x_internal[l];
    const Vector x_frozen = init.w1[l].forward(prev) / sqrt_n;
    m.x_gap = std::max(m.x_gap, (xl - x_frozen).norm() / sqrt_n);
    const Vector phi = apply_phi(cfg.activation, xl);
    const Vector dh = rate_scale * (now.w2[l].forward(phi) - init.w2[l].forward(phi));
    m.stream_gap = std::max(m.stream_gap, dh.norm() / sqrt_n);
  }
  return m;
}

double postact_bound(const NetConfig& cfg, const Vector& x, double c1, double c2) {
  if (c1 < 0.0 || c2 < 0.0) throw DomainError("postact_bound: constants must be nonnegative");
  if (c1 == 0.0 && c2 == 0.0) throw DomainError("postact_bound: c1 and c2 cannot both be zero");
  const double L = cfg.depth;
  const double growth = std::pow(1.0 + c1 * std::sqrt(cfg.T / (L * cfg.width)), L);
  return c1 * growth * x.norm() / std::sqrt(static_cast<double>(cfg.input_dim)) + c2 * std::sqrt(cfg.T * L);
}

}  // namespace nfd
