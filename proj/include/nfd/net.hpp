#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "nfd/activation.hpp"
#include "nfd/data.hpp"
#include "nfd/linalg.hpp"
#include "nfd/rng.hpp"
#include "nfd/weights.hpp"

namespace nfd {

enum class AlphaMode { ntk, mup };
enum class BlockKind { preact_one, postact_one, preact_two };
enum class BackwardMode { standard, decoupled };

AlphaMode parse_alpha_mode(std::string_view name);
BlockKind parse_block(std::string_view name);
BackwardMode parse_backward_mode(std::string_view name);
std::string_view block_name(BlockKind block);

/// Architecture and scaling of a finite ResNet
///   h_0 = U x / sqrt(d),  h_l = h_{l-1} + branch_l(h_{l-1}),  f = (alpha/sqrt(n)) v^T h_L.
/// Plain muP (no 1/sqrt(L) on the branch) of a one-layer block is T = L.
/// Two-layer blocks ignore T.
struct NetConfig {
  int width = 128;
  int depth = 4;
  int input_dim = 1;
  double T = 1.0;
  AlphaMode alpha_mode = AlphaMode::mup;
  BlockKind block = BlockKind::preact_one;
  Activation activation{};
  double lr_base = 0.1;
  bool depth_aware_lr = false;
  BackwardMode backward_mode = BackwardMode::standard;
  /// Decoupled backward uses the independent initial matrix only, without
  /// the learned updates.
  bool decoupled_freeze_updates = false;
  /// Storage of initial weights; empty picks float32 once the double copy
  /// would exceed kInitDoubleBudgetBytes.
  std::optional<Precision> init_precision;

  double alpha() const;
  /// Base rate: eta_c * n under mup, eta_c under ntk.
  double eta() const;
  /// sqrt(T / (L n)) for preact_one.
  double branch_scale() const;
};

inline constexpr std::size_t kInitDoubleBudgetBytes = std::size_t{1} << 30;

/// Throws ConfigError on invalid fields.
void validate(const NetConfig& cfg);

/// One trainable hidden matrix: W = init + delta. In decoupled mode the
/// backward pass multiplies by backward_init (+ delta).
struct Weight {
  InitMatrix init;
  UpdateMatrix delta;
  std::optional<InitMatrix> backward_init;

  Vector forward(const Vector& x) const;
  Vector backward(const Vector& g, bool freeze_updates) const;
  double at(int i, int j) const { return init.at(i, j) + delta.at(i, j); }
};

struct NetParams {
  Matrix U;                // n x d
  std::vector<Weight> w1;  // first (or only) matrix per block
  std::vector<Weight> w2;  // second matrix per block, preact_two only
  Vector v;
  std::int64_t step = 0;        // SGD updates applied
  std::uint64_t identity = 0;   // distinguishes independently created parameter sets
};

struct ForwardTrace {
  Vector x;
  std::vector<Vector> h;           // h_0..h_L
  std::vector<Vector> x_internal;  // preact_two: x_l; postact_one: z_l = W_l h_{l-1}/sqrt(n)
  Vector a0;                       // postact_one: U x / sqrt(d) before the nonlinearity
  double f = 0.0;
  std::int64_t step = 0;
  std::uint64_t identity = 0;
};

struct BackwardTrace {
  std::vector<Vector> g;  // g_0..g_L, g_l = (sqrt(n)/alpha) df/dh_l
  std::int64_t step = 0;
  std::uint64_t identity = 0;
};

/// Parameter gradient of f. Every matrix gradient is rank one:
/// scale * left right^T.
struct RankOne {
  double scale = 0.0;
  Vector left;
  Vector right;

  Matrix dense() const { return scale * left * right.transpose(); }
};

struct Gradients {
  RankOne u;
  std::vector<RankOne> w1;
  std::vector<RankOne> w2;
  Vector v;
};

NetParams init_params(const NetConfig& cfg, Rng& rng);

/// Test fixture: every entry of U, all hidden matrices and v set to `value`.
NetParams constant_params(const NetConfig& cfg, double value);

ForwardTrace forward(const NetParams& params, const Vector& x, const NetConfig& cfg);

/// Forward pass at initialization that samples each hidden matrix, applies
/// it and discards it. Consumes `rng` exactly as init_params does, so the
/// trace equals forward(init_params(cfg, rng), x, cfg) without holding all
/// L matrices in memory.
ForwardTrace forward_at_init(const NetConfig& cfg, Rng& rng, const Vector& x);
BackwardTrace backward(const NetParams& params, const ForwardTrace& trace, const NetConfig& cfg);

/// df/dtheta from the two traces (pseudo-gradient in decoupled mode).
Gradients gradients(const NetParams& params, const ForwardTrace& trace, const BackwardTrace& btrace,
                    const NetConfig& cfg);

void sgd_step(NetParams& params, const ForwardTrace& trace, const BackwardTrace& btrace, double loss_deriv,
              const NetConfig& cfg);

struct BatchItem {
  ForwardTrace trace;
  BackwardTrace btrace;
  double loss_deriv = 0.0;
};

/// One update with the gradient averaged over the batch.
void sgd_batch_step(NetParams& params, const std::vector<BatchItem>& batch, const NetConfig& cfg);

struct StepRecord {
  std::int64_t k = 0;
  double f = 0.0;
  double loss = 0.0;
  std::vector<double> h_norms;  // ||h_l|| / sqrt(n)
  std::vector<double> g_norms;  // ||g_l|| / sqrt(n)
};

struct TrainOptions {
  LossKind loss = LossKind::mse;
  int batch = 1;
};

struct TrainResult {
  NetParams params;
  std::vector<StepRecord> records;
};

/// Records are taken on the first sample of each batch, before the update.
TrainResult train(NetParams params, const NetConfig& cfg, OnlineSampler& sampler, int steps,
                  const TrainOptions& options = {});

struct CollapseMetrics {
  double x_gap = 0.0;
  double stream_gap = 0.0;
};

CollapseMetrics collapse_metrics(const NetParams& now, const NetParams& init, const ForwardTrace& trace,
                                 const NetConfig& cfg);

/// c1 (1 + c1 sqrt(T/(L n)))^L ||x|| / sqrt(d) + c2 sqrt(T L)
double postact_bound(const NetConfig& cfg, const Vector& x, double c1, double c2);

}  // namespace nfd
