#include "nfd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "nfd/cifar.hpp"
#include "nfd/errors.hpp"
#include "nfd/harness.hpp"
#include "nfd/kernel.hpp"

namespace nfd {

Rng seeded(std::uint64_t seed, StreamTag tag, std::uint64_t sub) {
  return Rng(seed, derive_stream(static_cast<std::uint64_t>(tag), sub));
}

Dataset synthetic_dataset(std::uint64_t seed, int size, int dim, TeacherKind teacher, double noise_std) {
  Rng rng = seeded(seed, kStreamData);
  Dataset ds;
  ds.inputs = sphere_inputs(rng, size, dim);
  ds.labels = teacher_labels(ds.inputs, rng, teacher, noise_std);
  ds.provenance = Provenance::synthetic_teacher;
  ds.target_encoding = teacher == TeacherKind::linear ? "linear teacher" : "narrow_resnet teacher";
  return ds;
}

Dataset make_dataset(const ExperimentSpec& spec, std::uint64_t seed, bool figure_scale) {
  if (spec.dataset == "cifar10") {
    if (!figure_scale) throw ConfigError("dataset: cifar10 runs require --figure-scale");
    return cifar10_read(data_dir() / spec.cifar_file, static_cast<int>(spec.dataset_size),
                        static_cast<int>(spec.cifar_downsample));
  }
  return synthetic_dataset(seed, static_cast<int>(spec.dataset_size), static_cast<int>(spec.input_dim),
                           parse_teacher(spec.teacher), spec.noise_std);
}

namespace {

double loss_at(const NetParams& p, const NetConfig& cfg, const Vector& x, double y) {
  const ForwardTrace tr = forward(p, x, cfg);
  return loss_and_deriv(LossKind::mse, tr.f, y).value;
}

/// Signs of every pre-activation the relu sees.
std::vector<bool> kink_pattern(const ForwardTrace& tr, const NetConfig& cfg) {
  std::vector<bool> out;
  auto add = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i] > 0.0);
  };
  switch (cfg.block) {
    case BlockKind::preact_one:
      for (std::size_t l = 0; l + 1 < tr.h.size(); ++l) add(tr.h[l]);
      break;
    case BlockKind::postact_one:
      add(tr.a0);
      for (const auto& z : tr.x_internal) add(z);
      break;
    case BlockKind::preact_two:
      for (const auto& z : tr.x_internal) add(z);
      break;
  }
  return out;
}

struct TensorError {
  double max_abs_diff = 0.0;
  double scale = 0.0;
  void add(double analytic, double numeric) {
    max_abs_diff = std::max(max_abs_diff, std::abs(analytic - numeric));
    scale = std::max({scale, std::abs(analytic), std::abs(numeric)});
  }
  double relative() const { return scale > 0.0 ? max_abs_diff / scale : max_abs_diff; }
};

}  // namespace

GradcheckResult gradcheck(const NetConfig& cfg_in, std::uint64_t seed, int warm_steps) {
  NetConfig cfg = cfg_in;
  cfg.init_precision = Precision::float64;
  Rng init = seeded(seed, kStreamInit);
  NetParams params = init_params(cfg, init);
  Rng data = seeded(seed, kStreamData);
  for (int s = 0; s < warm_steps; ++s) {
    const Matrix xs = sphere_inputs(data, 1, cfg.input_dim);
    const Vector x = xs.row(0).transpose();
    const double y = data.normal();
    const ForwardTrace tr = forward(params, x, cfg);
    const BackwardTrace bt = backward(params, tr, cfg);
    sgd_step(params, tr, bt, loss_and_deriv(LossKind::mse, tr.f, y).derivative, cfg);
  }
  const Matrix xs = sphere_inputs(data, 1, cfg.input_dim);
  const Vector x = xs.row(0).transpose();
  const double y = data.normal();

  const ForwardTrace tr = forward(params, x, cfg);
  const BackwardTrace bt = backward(params, tr, cfg);
  const Gradients gr = gradients(params, tr, bt, cfg);
  const double lp = loss_and_deriv(LossKind::mse, tr.f, y).derivative;
  const bool kinks = cfg.activation.kind == ActivationKind::relu;
  const std::vector<bool> base_pattern = kinks ? kink_pattern(tr, cfg) : std::vector<bool>{};

  GradcheckResult result;
  std::vector<TensorError> tensors;

  // theta is read and written through `access`; returns the numeric slope
  // or nullopt when the stencil crosses a relu kink.
  auto probe = [&](auto&& get, auto&& set) -> std::optional<double> {
    const double theta = get();
    const double step = 1e-5 * (1.0 + std::abs(theta));
    set(theta + step);
    const ForwardTrace plus = forward(params, x, cfg);
    set(theta - step);
    const ForwardTrace minus = forward(params, x, cfg);
    set(theta);
    if (kinks && (kink_pattern(plus, cfg) != base_pattern || kink_pattern(minus, cfg) != base_pattern)) {
      return std::nullopt;
    }
    const double lp_plus = loss_and_deriv(LossKind::mse, plus.f, y).value;
    const double lp_minus = loss_and_deriv(LossKind::mse, minus.f, y).value;
    return (lp_plus - lp_minus) / (2.0 * step);
  };
  auto record = [&](TensorError& te, double analytic, std::optional<double> numeric) {
    if (!numeric) {
      ++result.entries_skipped;
      return;
    }
    ++result.entries_checked;
    te.add(analytic, *numeric);
  };

  {
    TensorError te;
    const Matrix gu = lp * gr.u.dense();
    for (int i = 0; i < params.U.rows(); ++i) {
      for (int j = 0; j < params.U.cols(); ++j) {
        record(te, gu(i, j),
               probe([&] { return params.U(i, j); }, [&](double v) { params.U(i, j) = v; }));
      }
    }
    tensors.push_back(te);
  }
  auto check_weights = [&](std::vector<Weight>& ws, const std::vector<RankOne>& gs) {
    for (std::size_t l = 0; l < ws.size(); ++l) {
      TensorError te;
      const Matrix g = lp * gs[l].dense();
      Weight& w = ws[l];
      for (int i = 0; i < w.init.rows(); ++i) {
        for (int j = 0; j < w.init.cols(); ++j) {
          // shifts the initial entry; W = init + delta moves by the same amount
          record(te, g(i, j), probe([&] { return w.init.at(i, j); }, [&](double v) {
                   w.init.set(i, j, v);
                   if (cfg.backward_mode == BackwardMode::standard && w.backward_init) w.backward_init->set(i, j, v);
                 }));
        }
      }
      tensors.push_back(te);
    }
  };
  check_weights(params.w1, gr.w1);
  check_weights(params.w2, gr.w2);
  {
    TensorError te;
    for (int i = 0; i < params.v.size(); ++i) {
      record(te, lp * gr.v[i], probe([&] { return params.v[i]; }, [&](double v) { params.v[i] = v; }));
    }
    tensors.push_back(te);
  }
  for (const auto& te : tensors) result.max_rel_error = std::max(result.max_rel_error, te.relative());
  (void)loss_at;
  return result;
}

std::vector<double> finite_outputs(const NetConfig& cfg, std::uint64_t seed, const std::vector<Sample>& samples,
                                   int k_max, LossKind loss) {
  if (static_cast<int>(samples.size()) < k_max + 1) throw ConfigError("finite_outputs: need k_max + 1 samples");
  Rng init = seeded(seed, kStreamInit);
  NetParams params = init_params(cfg, init);
  std::vector<double> out;
  for (int k = 0; k <= k_max; ++k) {
    const ForwardTrace tr = forward(params, samples[k].x, cfg);
    out.push_back(tr.f);
    if (k == k_max) break;
    const BackwardTrace bt = backward(params, tr, cfg);
    sgd_step(params, tr, bt, loss_and_deriv(loss, tr.f, samples[k].y).derivative, cfg);
  }
  return out;
}

double gia_mean_gap(const NetConfig& cfg, std::uint64_t seed, const Dataset& data, int steps) {
  NetConfig std_cfg = cfg;
  std_cfg.backward_mode = BackwardMode::standard;
  NetConfig dec_cfg = cfg;
  dec_cfg.backward_mode = BackwardMode::decoupled;
  Rng init_a = seeded(seed, kStreamInit);
  Rng init_b = seeded(seed, kStreamInit);
  OnlineSampler sampler_a(data, seeded(seed, kStreamSampler));
  OnlineSampler sampler_b(data, seeded(seed, kStreamSampler));
  const TrainResult a = train(init_params(std_cfg, init_a), std_cfg, sampler_a, steps);
  const TrainResult b = train(init_params(dec_cfg, init_b), dec_cfg, sampler_b, steps);
  double sum = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double gap = std::abs(a.records[k].f - b.records[k].f);
    if (!std::isfinite(gap)) return std::numeric_limits<double>::infinity();
    sum += gap;
  }
  return steps > 0 ? sum / steps : 0.0;
}

CollapseMetrics collapse_run(const NetConfig& cfg, std::uint64_t seed, const Dataset& data, int steps) {
  Rng init = seeded(seed, kStreamInit);
  NetParams start = init_params(cfg, init);
  NetParams frozen = start;
  OnlineSampler sampler(data, seeded(seed, kStreamSampler));
  TrainResult tr = train(std::move(start), cfg, sampler, steps);
  const Sample probe = sampler.next();
  const ForwardTrace trace = forward(tr.params, probe.x, cfg);
  return collapse_metrics(tr.params, frozen, trace, cfg);
}

double final_training_loss(const NetConfig& cfg, std::uint64_t seed, const Dataset& data, int steps,
                           const TrainOptions& options) {
  Rng init = seeded(seed, kStreamInit);
  OnlineSampler sampler(data, seeded(seed, kStreamSampler));
  TrainResult tr = train(init_params(cfg, init), cfg, sampler, steps, options);
  double sum = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const ForwardTrace t = forward(tr.params, data.inputs.row(i).transpose(), cfg);
    const double l = loss_and_deriv(options.loss, t.f, data.labels[i]).value;
    if (!std::isfinite(l)) return std::numeric_limits<double>::infinity();
    sum += l;
  }
  return sum / data.size();
}

namespace {

ResultRecord rec(const ExperimentSpec& spec, std::string metric, double value) {
  ResultRecord r;
  r.experiment = std::string(experiment_name(spec.experiment));
  r.metric = std::move(metric);
  r.value = value;
  return r;
}

NetConfig base_net(const ExperimentSpec& spec, int n, int L, double T, const std::string& act) {
  NetConfig cfg;
  cfg.width = n;
  cfg.depth = L;
  cfg.T = T;
  cfg.input_dim = static_cast<int>(spec.input_dim);
  cfg.alpha_mode = parse_alpha_mode(spec.alpha_mode);
  cfg.activation = Activation::parse(act);
  cfg.lr_base = spec.eta_c.front();
  cfg.decoupled_freeze_updates = spec.decoupled_freeze_updates;
  return cfg;
}

std::vector<Sample> first_samples(const Dataset& ds, int count) {
  if (ds.size() < count) throw ConfigError("dataset_size must be >= k_max + 1");
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) out.push_back({ds.inputs.row(i).transpose(), ds.labels[i]});
  return out;
}

TrainOptions train_options(const ExperimentSpec& spec, bool figure_scale) {
  if (spec.batch > 1 && !figure_scale) throw ConfigError("batch > 1 requires --figure-scale");
  return {parse_loss(spec.loss), static_cast<int>(spec.batch)};
}

using Key = std::tuple<std::string, std::int64_t, std::int64_t, double, double, std::int64_t>;

/// Mean over seeds of every metric, keyed by the other coordinates.
std::vector<ResultRecord> seed_means(const std::vector<ResultRecord>& rows, const std::string& suffix) {
  std::map<std::pair<std::string, Key>, std::pair<ResultRecord, std::pair<double, int>>> acc;
  for (const auto& r : rows) {
    if (!r.seed) continue;
    const Key key{r.variant, r.n.value_or(-1), r.L.value_or(-1), r.T.value_or(-1), r.eta_c.value_or(-1),
                  r.k.value_or(-1)};
    auto& slot = acc[{r.metric, key}];
    if (slot.second.second == 0) {
      slot.first = r;
      slot.first.seed.reset();
      slot.first.metric = r.metric + suffix;
    }
    slot.second.first += r.value;
    slot.second.second += 1;
  }
  std::vector<ResultRecord> out;
  for (auto& [key, slot] : acc) {
    slot.first.value = slot.second.first / slot.second.second;
    out.push_back(slot.first);
  }
  return out;
}

Grid grid_gradcheck(const ExperimentSpec& spec) {
  Grid g;
  for (const auto& b : spec.blocks) {
    for (const auto& a : spec.activations) {
      for (auto seed : spec.seeds) {
        g.points.push_back([=] {
          NetConfig cfg = base_net(spec, static_cast<int>(spec.widths.front()), static_cast<int>(spec.depths.front()),
                                   spec.T.front(), a);
          cfg.block = parse_block(b);
          const GradcheckResult res = gradcheck(cfg, static_cast<std::uint64_t>(seed));
          std::vector<ResultRecord> out;
          for (auto [m, v] : {std::pair{"max_rel_error", res.max_rel_error},
                              std::pair{"entries_checked", static_cast<double>(res.entries_checked)},
                              std::pair{"entries_skipped", static_cast<double>(res.entries_skipped)}}) {
            ResultRecord r = rec(spec, m, v);
            r.seed = seed;
            r.n = cfg.width;
            r.L = cfg.depth;
            r.T = cfg.T;
            r.variant = b + "/" + a;
            out.push_back(r);
          }
          return out;
        });
      }
    }
  }
  return g;
}

Grid grid_preact_postact(const ExperimentSpec& spec) {
  Grid g;
  for (auto n : spec.widths) {
    for (auto L : spec.depths) {
      for (const auto& a : spec.activations) {
        for (auto seed : spec.seeds) {
          g.points.push_back([=] {
            std::vector<ResultRecord> out;
            Rng data = seeded(seed, kStreamData);
            const Matrix xs = sphere_inputs(data, 1, static_cast<int>(spec.input_dim));
            const Vector x = xs.row(0).transpose();
            for (BlockKind block : {BlockKind::preact_one, BlockKind::postact_one}) {
              NetConfig cfg = base_net(spec, static_cast<int>(n), static_cast<int>(L), spec.T.front(), a);
              cfg.block = block;
              Rng init = seeded(seed, kStreamInit);
              const ForwardTrace tr = forward_at_init(cfg, init, x);
              const Vector& hL = tr.h.back();
              auto push = [&](const char* m, double v) {
                ResultRecord r = rec(spec, m, v);
                r.seed = seed;
                r.n = n;
                r.L = L;
                r.T = cfg.T;
                r.variant = std::string(block_name(block)) + "/" + a;
                out.push_back(r);
              };
              push("mean_coord_hL", hL.mean());
              push("norm_hL", hL.norm() / std::sqrt(static_cast<double>(n)));
              if (block == BlockKind::postact_one && cfg.activation.kind == ActivationKind::relu) {
                push("postact_bound", postact_bound(cfg, x, 1.0 / std::sqrt(2.0 * std::numbers::pi), 0.0));
              }
            }
            return out;
          });
        }
      }
    }
  }
  g.summarize = [](const std::vector<ResultRecord>& rows) { return seed_means(rows, "_mean"); };
  return g;
}

Grid grid_init_sde(const ExperimentSpec& spec) {
  Grid g;
  for (double T : spec.T) {
    for (const auto& a : spec.activations) {
      g.points.push_back([=] {
        LimitConfig lc;
        lc.steps_L = static_cast<int>(spec.reference_steps);
        lc.T = T;
        lc.particles = static_cast<int>(spec.particles);
        lc.k_max = 0;
        lc.activation = Activation::parse(a);
        lc.spd_floor = spec.spd_floor;
        Rng data = seeded(spec.seeds.front(), kStreamData);
        const Matrix xs = sphere_inputs(data, 1, static_cast<int>(spec.input_dim));
        const LimitRun run = simulate_training(lc, {{xs.row(0).transpose(), 0.0}}, seeded(spec.seeds.front(), kStreamLimit));
        double m = 0.0, m2 = 0.0, g0 = 0.0;
        const int P = lc.particles;
        for (int p = 0; p < P; ++p) {
          const double h = run.ensemble.h.at(lc.steps_L, 0, p);
          m += h * h;
          m2 += h * h * h * h;
          g0 += run.ensemble.g.at(0, 0, p) * run.ensemble.g.at(0, 0, p);
        }
        m /= P;
        g0 /= P;
        std::vector<ResultRecord> out;
        auto push = [&](const char* metric, double v) {
          ResultRecord r = rec(spec, metric, v);
          r.L = lc.steps_L;
          r.T = T;
          r.variant = "limit/" + a;
          out.push_back(r);
        };
        push("second_moment_hT", m);
        push("second_moment_hT_se", std::sqrt(std::max(0.0, m2 / P - m * m) / P));
        push("second_moment_g0", g0);
        return out;
      });
      for (auto n : spec.widths) {
        for (auto L : spec.depths) {
          for (auto seed : spec.seeds) {
            g.points.push_back([=] {
              NetConfig cfg = base_net(spec, static_cast<int>(n), static_cast<int>(L), T, a);
              Rng data = seeded(spec.seeds.front(), kStreamData);
              const Matrix xs = sphere_inputs(data, 1, cfg.input_dim);
              Rng init = seeded(seed, kStreamInit);
              const ForwardTrace tr = forward_at_init(cfg, init, xs.row(0).transpose());
              std::vector<ResultRecord> out;
              auto push = [&](const char* metric, double v) {
                ResultRecord r = rec(spec, metric, v);
                r.seed = seed;
                r.n = n;
                r.L = L;
                r.T = T;
                r.variant = "finite/" + a;
                out.push_back(r);
              };
              push("second_moment_hL", tr.h.back().squaredNorm() / static_cast<double>(n));
              if (cfg.activation.kind == ActivationKind::identity) {
                push("formula_second_moment", std::pow(1.0 + T / L, static_cast<double>(L)));
                push("formula_gap", std::abs(std::exp(T) - std::pow(1.0 + T / L, static_cast<double>(L))));
              }
              return out;
            });
          }
        }
      }
    }
  }
  g.summarize = [](const std::vector<ResultRecord>& rows) { return seed_means(rows, "_mean"); };
  return g;
}

LimitConfig limit_config(const ExperimentSpec& spec, int steps_L, double T, const std::string& act, bool correction) {
  LimitConfig lc;
  lc.steps_L = steps_L;
  lc.T = T;
  lc.particles = static_cast<int>(spec.particles);
  lc.k_max = static_cast<int>(spec.k_max);
  lc.eta_c = spec.eta_c.front();
  lc.activation = Activation::parse(act);
  lc.loss = parse_loss(spec.loss);
  lc.correction_term = correction;
  lc.spd_floor = spec.spd_floor;
  return lc;
}

std::vector<ResultRecord> limit_rows(const ExperimentSpec& spec, const LimitRun& run, const std::string& variant) {
  std::vector<ResultRecord> out;
  for (std::size_t k = 0; k < run.outputs.size(); ++k) {
    for (auto [m, v] : {std::pair{"f_limit", run.outputs[k]}, std::pair{"f_limit_se", run.output_se[k]}}) {
      ResultRecord r = rec(spec, m, v);
      r.L = run.cfg.steps_L;
      r.T = run.cfg.T;
      r.eta_c = run.cfg.eta_c;
      r.k = static_cast<std::int64_t>(k);
      r.variant = variant;
      out.push_back(r);
    }
  }
  return out;
}

Grid grid_nfd_train(const ExperimentSpec& spec, bool figure_scale) {
  if (spec.batch > 1) throw ConfigError("nfd_train_convergence compares online training; batch must be 1");
  Grid g;
  const int K = static_cast<int>(spec.k_max);
  auto samples_for = [spec, figure_scale, K] {
    return first_samples(make_dataset(spec, spec.seeds.front(), figure_scale), K + 1);
  };
  for (double T : spec.T) {
    for (const auto& a : spec.activations) {
      g.points.push_back([=] {
        const LimitRun run = simulate_training(limit_config(spec, static_cast<int>(spec.reference_steps), T, a, false),
                                               samples_for(), seeded(spec.seeds.front(), kStreamLimit));
        return limit_rows(spec, run, "nfd/" + a);
      });
      for (auto L : spec.depths) {
        if (spec.correction_term) {
          g.points.push_back([=] {
            const LimitRun run = simulate_training(limit_config(spec, static_cast<int>(L), T, a, true), samples_for(),
                                                   seeded(spec.seeds.front(), kStreamLimit, static_cast<std::uint64_t>(L)));
            return limit_rows(spec, run, "depth_limit/" + a);
          });
        }
        for (auto n : spec.widths) {
          for (auto seed : spec.seeds) {
            g.points.push_back([=] {
              NetConfig cfg = base_net(spec, static_cast<int>(n), static_cast<int>(L), T, a);
              const auto samples = samples_for();
              cfg.input_dim = static_cast<int>(samples[0].x.size());
              const auto fs = finite_outputs(cfg, static_cast<std::uint64_t>(seed), samples, K, parse_loss(spec.loss));
              std::vector<ResultRecord> out;
              for (int k = 0; k <= K; ++k) {
                ResultRecord r = rec(spec, "f_finite", fs[k]);
                r.seed = seed;
                r.n = n;
                r.L = L;
                r.T = T;
                r.eta_c = cfg.lr_base;
                r.k = k;
                r.variant = "finite/" + a;
                out.push_back(r);
              }
              return out;
            });
          }
        }
      }
    }
  }
  g.summarize = [spec](const std::vector<ResultRecord>& rows) {
    // mean squared error of the finite outputs against the infinite-depth reference
    std::map<std::tuple<std::string, double, std::int64_t>, double> reference;
    for (const auto& r : rows) {
      if (r.metric == "f_limit" && r.variant.rfind("nfd/", 0) == 0) {
        reference[{r.variant.substr(4), *r.T, *r.k}] = r.value;
      }
    }
    std::map<std::tuple<std::string, std::int64_t, std::int64_t, double, std::int64_t>, std::pair<double, int>> acc;
    for (const auto& r : rows) {
      if (r.metric != "f_finite") continue;
      const std::string act = r.variant.substr(7);
      auto it = reference.find({act, *r.T, *r.k});
      if (it == reference.end()) continue;
      auto& slot = acc[{act, *r.n, *r.L, *r.T, *r.k}];
      slot.first += (r.value - it->second) * (r.value - it->second);
      slot.second += 1;
    }
    std::vector<ResultRecord> out;
    for (const auto& [key, slot] : acc) {
      ResultRecord r = rec(spec, "mean_sq_err", slot.first / slot.second);
      r.variant = "finite/" + std::get<0>(key);
      r.n = std::get<1>(key);
      r.L = std::get<2>(key);
      r.T = std::get<3>(key);
      r.eta_c = spec.eta_c.front();
      r.k = std::get<4>(key);
      out.push_back(r);
    }
    return out;
  };
  return g;
}

NetConfig scaled_net(const ExperimentSpec& spec, int n, int L, const std::string& act, const std::string& scaling,
                     int input_dim) {
  NetConfig cfg = base_net(spec, n, L, scaling == "plain_mup" ? static_cast<double>(L) : spec.T.front(), act);
  cfg.input_dim = input_dim;
  return cfg;
}

Grid grid_gia(const ExperimentSpec& spec, bool figure_scale) {
  if (spec.batch > 1) throw ConfigError("gia compares online trajectories; batch must be 1");
  Grid g;
  for (auto n : spec.widths) {
    for (auto L : spec.depths) {
      for (const auto& scaling : spec.scalings) {
        for (const auto& a : spec.activations) {
          for (auto seed : spec.seeds) {
            g.points.push_back([=] {
              const Dataset ds = make_dataset(spec, static_cast<std::uint64_t>(seed), figure_scale);
              const NetConfig cfg = scaled_net(spec, static_cast<int>(n), static_cast<int>(L), a, scaling, ds.dim());
              ResultRecord r = rec(spec, "mean_abs_gap",
                                   gia_mean_gap(cfg, static_cast<std::uint64_t>(seed), ds, static_cast<int>(spec.steps)));
              r.seed = seed;
              r.n = n;
              r.L = L;
              r.T = cfg.T;
              r.eta_c = cfg.lr_base;
              r.variant = scaling + "/" + a;
              return std::vector<ResultRecord>{r};
            });
          }
        }
      }
    }
  }
  g.summarize = [](const std::vector<ResultRecord>& rows) { return seed_means(rows, "_mean"); };
  return g;
}

Grid grid_eigen(const ExperimentSpec& spec, bool figure_scale) {
  Grid g;
  for (double T : spec.T) {
    for (const auto& a : spec.activations) {
      for (auto steps : spec.steps_L) {
        for (auto seed : spec.seeds) {
          g.points.push_back([=] {
            const Dataset ds = make_dataset(spec, static_cast<std::uint64_t>(seed), figure_scale);
            const LimitConfig lc = limit_config(spec, static_cast<int>(steps), T, a, spec.correction_term);
            const LimitRun run = simulate_training(lc, first_samples(ds, lc.k_max + 1),
                                                   seeded(static_cast<std::uint64_t>(seed), kStreamLimit));
            std::vector<ResultRecord> out;
            for (const auto& m : covariance_minima(run)) {
              for (auto [name, v] : {std::pair{"sigma_min", m.sigma_min}, std::pair{"theta_min", m.theta_min}}) {
                ResultRecord r = rec(spec, name, v);
                r.seed = seed;
                r.L = steps;
                r.T = T;
                r.k = m.iteration;
                r.t = m.time_index * lc.tau();
                r.variant = a;
                out.push_back(r);
              }
            }
            for (auto [name, v] : {std::pair{"spd_flags", static_cast<double>(run.spd_flags.size())},
                                   std::pair{"jitter_events", static_cast<double>(run.jitter_events.size())}}) {
              ResultRecord r = rec(spec, name, v);
              r.seed = seed;
              r.L = steps;
              r.T = T;
              r.variant = a;
              out.push_back(r);
            }
            return out;
          });
        }
      }
    }
  }
  return g;
}

std::vector<ResultRecord> slopes_over_L(const ExperimentSpec& spec, const std::vector<ResultRecord>& means,
                                        const std::vector<std::string>& metrics) {
  std::map<std::string, std::vector<ResultRecord>> by_variant;
  for (const auto& r : means) by_variant[r.variant].push_back(r);
  std::vector<ResultRecord> out;
  for (const auto& [variant, rows] : by_variant) {
    for (const auto& m : metrics) {
      try {
        const SlopeFit fit = slope_fit(rows, "L", m);
        for (auto [name, v] : {std::pair{m + "_slope", fit.slope}, std::pair{m + "_slope_stderr", fit.stderr_slope}}) {
          ResultRecord r = rec(spec, name, v);
          r.variant = variant;
          out.push_back(r);
        }
      } catch (const DomainError&) {
        // fewer than three depths or a zero metric: no slope row
      }
    }
  }
  return out;
}

Grid grid_collapse(const ExperimentSpec& spec, bool figure_scale) {
  Grid g;
  const TrainOptions opts = train_options(spec, figure_scale);
  (void)opts;
  for (auto n : spec.widths) {
    for (auto L : spec.depths) {
      for (const auto& mode : spec.lr_modes) {
        for (auto seed : spec.seeds) {
          g.points.push_back([=] {
            const Dataset ds = make_dataset(spec, static_cast<std::uint64_t>(seed), figure_scale);
            NetConfig cfg = base_net(spec, static_cast<int>(n), static_cast<int>(L), 1.0, spec.activations.front());
            cfg.input_dim = ds.dim();
            cfg.block = BlockKind::preact_two;
            cfg.depth_aware_lr = mode == "depth_aware";
            const CollapseMetrics m = collapse_run(cfg, static_cast<std::uint64_t>(seed), ds, static_cast<int>(spec.steps));
            std::vector<ResultRecord> out;
            for (auto [name, v] : {std::pair{"x_gap", m.x_gap}, std::pair{"stream_gap", m.stream_gap}}) {
              ResultRecord r = rec(spec, name, v);
              r.seed = seed;
              r.n = n;
              r.L = L;
              r.eta_c = cfg.lr_base;
              r.variant = mode;
              out.push_back(r);
            }
            return out;
          });
        }
      }
    }
  }
  g.summarize = [spec](const std::vector<ResultRecord>& rows) {
    auto means = seed_means(rows, "");
    auto slopes = slopes_over_L(spec, means, {"x_gap", "stream_gap"});
    for (auto& r : means) r.metric += "_mean";
    means.insert(means.end(), slopes.begin(), slopes.end());
    return means;
  };
  return g;
}

Grid grid_hp_sweep(const ExperimentSpec& spec, bool figure_scale) {
  Grid g;
  const TrainOptions opts = train_options(spec, figure_scale);
  for (auto n : spec.widths) {
    for (auto L : spec.depths) {
      for (const auto& mode : spec.lr_modes) {
        for (double eta : spec.eta_c) {
          for (auto seed : spec.seeds) {
            g.points.push_back([=] {
              const Dataset ds = make_dataset(spec, static_cast<std::uint64_t>(seed), figure_scale);
              NetConfig cfg = base_net(spec, static_cast<int>(n), static_cast<int>(L), 1.0, spec.activations.front());
              cfg.input_dim = ds.dim();
              cfg.block = BlockKind::preact_two;
              cfg.lr_base = eta;
              cfg.depth_aware_lr = mode == "depth_aware";
              ResultRecord r = rec(spec, "final_loss",
                                   final_training_loss(cfg, static_cast<std::uint64_t>(seed), ds,
                                                       static_cast<int>(spec.steps), opts));
              r.seed = seed;
              r.n = n;
              r.L = L;
              r.eta_c = eta;
              r.variant = mode;
              return std::vector<ResultRecord>{r};
            });
          }
        }
      }
    }
  }
  g.summarize = [spec](const std::vector<ResultRecord>& rows) {
    std::map<std::tuple<std::string, std::int64_t, std::int64_t, std::int64_t>, std::pair<double, double>> best;
    for (const auto& r : rows) {
      if (r.metric != "final_loss") continue;
      auto key = std::tuple{r.variant, *r.n, *r.L, *r.seed};
      auto it = best.find(key);
      if (it == best.end() || r.value < it->second.first) best[key] = {r.value, *r.eta_c};
    }
    std::vector<ResultRecord> out;
    for (const auto& [key, v] : best) {
      ResultRecord r = rec(spec, "argmin_eta_c", v.second);
      r.variant = std::get<0>(key);
      r.n = std::get<1>(key);
      r.L = std::get<2>(key);
      r.seed = std::get<3>(key);
      out.push_back(r);
    }
    return out;
  };
  return g;
}

Grid grid_kernel_capacity(const ExperimentSpec& spec, bool figure_scale) {
  Grid g;
  for (double T : spec.T) {
    for (const auto& a : spec.activations) {
      for (auto seed : spec.seeds) {
        g.points.push_back([=] {
          ExperimentSpec full = spec;
          full.dataset_size = spec.dataset_size + spec.test_size;
          const Dataset ds = make_dataset(full, static_cast<std::uint64_t>(seed), figure_scale);
          const int N = static_cast<int>(spec.dataset_size);
          const int M = ds.size();
          KernelConfig kc;
          kc.T = T;
          kc.steps = static_cast<int>(spec.kernel_steps);
          kc.particles = static_cast<int>(spec.particles);
          kc.activation = Activation::parse(a);
          kc.inputs = ds.inputs;
          const GramMatrix gram = nngp_gram(kc, seeded(static_cast<std::uint64_t>(seed), kStreamKernel));
          const Matrix k_train = gram.values.topLeftCorner(N, N);
          const Matrix cross = gram.values.bottomLeftCorner(M - N, N);
          const Vector preds = kernel_ridge(k_train, ds.labels.head(N), spec.ridge_lambda, cross);
          const double mse = (preds - ds.labels.tail(M - N)).squaredNorm() / (M - N);
          std::vector<ResultRecord> out;
          ResultRecord r = rec(spec, "test_mse", mse);
          r.seed = seed;
          r.T = T;
          r.variant = "kernel_ridge/" + a;
          out.push_back(r);
          if (spec.capacity_finite_net) {
            Dataset train_ds;
            train_ds.inputs = ds.inputs.topRows(N);
            train_ds.labels = ds.labels.head(N);
            NetConfig cfg = base_net(spec, static_cast<int>(spec.widths.front()), static_cast<int>(spec.depths.front()), T, a);
            cfg.input_dim = ds.dim();
            Rng init = seeded(static_cast<std::uint64_t>(seed), kStreamInit);
            OnlineSampler sampler(train_ds, seeded(static_cast<std::uint64_t>(seed), kStreamSampler));
            const TrainResult tr = train(init_params(cfg, init), cfg, sampler, static_cast<int>(spec.steps),
                                         train_options(spec, figure_scale));
            double err = 0.0;
            for (int i = N; i < M; ++i) {
              const double f = forward(tr.params, ds.inputs.row(i).transpose(), cfg).f;
              err += (f - ds.labels[i]) * (f - ds.labels[i]);
            }
            ResultRecord q = rec(spec, "test_mse", err / (M - N));
            q.seed = seed;
            q.T = T;
            q.n = cfg.width;
            q.L = cfg.depth;
            q.eta_c = cfg.lr_base;
            q.variant = "finite_net/" + a;
            out.push_back(q);
          }
          return out;
        });
      }
    }
  }
  g.summarize = [](const std::vector<ResultRecord>& rows) { return seed_means(rows, "_mean"); };
  return g;
}

Grid grid_correction_gap(const ExperimentSpec& spec, bool figure_scale) {
  Grid g;
  for (double T : spec.T) {
    for (const auto& a : spec.activations) {
      for (auto seed : spec.seeds) {
        g.points.push_back([=] {
          const Dataset ds = make_dataset(spec, static_cast<std::uint64_t>(seed), figure_scale);
          const LimitConfig lc = limit_config(spec, 8, T, a, true);
          std::vector<int> steps(spec.steps_L.begin(), spec.steps_L.end());
          const auto gaps = correction_gap(lc, first_samples(ds, lc.k_max + 1),
                                           seeded(static_cast<std::uint64_t>(seed), kStreamLimit), steps);
          std::vector<ResultRecord> out;
          for (const auto& p : gaps) {
            for (auto [name, v] : {std::pair{"gap", p.gap}, std::pair{"f_on", p.f_on}, std::pair{"f_off", p.f_off}}) {
              ResultRecord r = rec(spec, name, v);
              r.seed = seed;
              r.L = p.steps_L;
              r.T = T;
              r.eta_c = lc.eta_c;
              r.k = lc.k_max;
              r.variant = a;
              out.push_back(r);
            }
          }
          return out;
        });
      }
    }
  }
  g.summarize = [spec](const std::vector<ResultRecord>& rows) {
    auto means = seed_means(rows, "");
    auto slopes = slopes_over_L(spec, means, {"gap"});
    for (auto& r : means) r.metric += "_mean";
    means.insert(means.end(), slopes.begin(), slopes.end());
    return means;
  };
  return g;
}

}  // namespace

Grid make_grid(const ExperimentSpec& spec, bool figure_scale) {
  switch (spec.experiment) {
    case Experiment::gradcheck: return grid_gradcheck(spec);
    case Experiment::preact_postact: return grid_preact_postact(spec);
    case Experiment::init_sde_convergence: return grid_init_sde(spec);
    case Experiment::nfd_train_convergence: return grid_nfd_train(spec, figure_scale);
    case Experiment::gia: return grid_gia(spec, figure_scale);
    case Experiment::eigen_monitor: return grid_eigen(spec, figure_scale);
    case Experiment::collapse: return grid_collapse(spec, figure_scale);
    case Experiment::hp_sweep: return grid_hp_sweep(spec, figure_scale);
    case Experiment::kernel_capacity: return grid_kernel_capacity(spec, figure_scale);
    case Experiment::correction_gap: return grid_correction_gap(spec, figure_scale);
  }
  throw ConfigError("unknown experiment");
}

std::string experiment_description(Experiment e) {
  switch (e) {
    case Experiment::preact_postact:
      return "h_L of pre-act vs post-act ResNets across depth; post-act grows, pre-act stays stable";
    case Experiment::init_sde_convergence:
      return "forward SDE at init: finite-net second moments vs the SDE limit, O(1/L + 1/n) gap";
    case Experiment::nfd_train_convergence:
      return "training limit: finite-net outputs f^(k) vs the particle NFD simulation";
    case Experiment::gia:
      return "standard vs decoupled backward outputs across depth (gradient independence)";
    case Experiment::eigen_monitor:
      return "minimum eigenvalues of the covariance matrices Sigma_t^(k), Theta_t^(k) across layers";
    case Experiment::collapse:
      return "two-layer block internal collapse x_gap ~ L^-1/2 and its depth-aware LR fix";
    case Experiment::hp_sweep:
      return "learning-rate transfer across depth with and without the depth-aware LR";
    case Experiment::kernel_capacity:
      return "time horizon T vs capacity, via NNGP kernel ridge (optionally finite nets)";
    case Experiment::correction_gap:
      return "tau^2 forward-backward correlation term: paired on/off gap vanishing as 1/L";
    case Experiment::gradcheck:
      return "closed-form gradients vs central finite differences for every block and activation";
  }
  return "";
}

}  // namespace nfd
