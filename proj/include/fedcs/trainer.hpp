#pragma once

#include <cmath>
#include <vector>

#include "fedcs/lista.hpp"

namespace fedcs {

enum class BetaMode {
  kLrDecay,            // beta^(l-i) scales the stage-2/3 rate of layer i
  kLiteralWeightScale  // multiply all weights by beta after stage 3
};

// Seed stream tags; every derived stream in the project hangs off one of
// these so no two consumers ever share an engine state.
inline constexpr std::uint64_t kStreamLayerInit = 0x11;
inline constexpr std::uint64_t kStreamShuffle = 0x22;
inline constexpr std::uint64_t kStreamSensing = 0x33;
inline constexpr std::uint64_t kStreamTrainData = 0x44;
inline constexpr std::uint64_t kStreamTestData = 0x55;

struct TrainConfig {
  double alpha0 = 5e-4;
  double alpha1 = 1e-4;  // 0.2 alpha0
  double alpha2 = 1e-5;  // 0.02 alpha0
  double beta = 0.3;
  BetaMode beta_mode = BetaMode::kLrDecay;
  LossMode loss_mode = LossMode::kSumLayers;
  int epochs = 100;   // E, per stage
  int layers = 10;    // L
  int minibatch = 0;  // 0 = full batch
  InitMode init_mode = InitMode::kIstaTied;
  double init_step = 0.0;    // 0 = derive from A
  double init_lambda = 0.1;  // tied init: theta = lambda * step
  double init_perturb = 1e-3;
  std::uint64_t seed = 1;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.alpha0 <= 0.0 || cfg.alpha1 <= 0.0 || cfg.alpha2 <= 0.0)
    throw std::invalid_argument("learning rates must be positive");
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0))
    throw std::invalid_argument("beta must lie in (0,1]");
  if (cfg.epochs < 0) throw std::invalid_argument("epoch count must be >= 0");
  if (cfg.layers < 1) throw std::invalid_argument("layer count must be >= 1");
  if (cfg.minibatch < 0) throw std::invalid_argument("minibatch must be >= 0");
}

struct EpochRecord {
  int client_id = 0;
  int layer = 0;
  int stage = 0;  // 1..3
  int epoch = 0;  // 1..E
  double loss = 0.0;  // training loss before this epoch's update
  int round = 0;      // set by the federation, 0 for centralized runs
};

struct TrainStats {
  long long epoch_sweeps = 0;
  long long beta_steps = 0;
  long long theta_clamps = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  TrainStats stats;
};

inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

inline Batch gather_columns(const Batch& b, const int* idx, int count) {
  Batch sub;
  sub.x_true.resize(b.x_true.rows(), count);
  sub.y.resize(b.y.rows(), count);
  sub.x0.resize(b.x0.rows(), count);
  for (int j = 0; j < count; ++j) {
    sub.x_true.col(j) = b.x_true.col(idx[j]);
    sub.y.col(j) = b.y.col(idx[j]);
    sub.x0.col(j) = b.x0.col(idx[j]);
  }
  return sub;
}

namespace detail {

// One epoch over the batch: a single summed-gradient step by default, or a
// seeded-shuffle pass over minibatches. Returns the training loss observed
// during the epoch (pre-update).
inline double run_epoch(NetworkParams& net, const Batch& batch,
                        const std::vector<double>& rates, LossMode mode,
                        int minibatch, std::uint64_t shuffle_seed,
                        TrainStats& stats) {
  double logged = 0.0;
  if (minibatch <= 0 || minibatch >= batch.size()) {
    const GradientBundle g = backward(net, batch, mode);
    stats.theta_clamps += apply_update(net, g, rates);
    logged = g.loss;
  } else {
    std::vector<int> order(batch.size());
    for (int i = 0; i < batch.size(); ++i) order[i] = i;
    Rng rng(shuffle_seed);
    shuffle_indices(order, rng);
    for (int start = 0; start < batch.size(); start += minibatch) {
      const int count = std::min(minibatch, batch.size() - start);
      const Batch sub = gather_columns(batch, order.data() + start, count);
      const GradientBundle g = backward(net, sub, mode);
      stats.theta_clamps += apply_update(net, g, rates);
      logged += g.loss;
    }
  }
  ++stats.epoch_sweeps;
  return logged;
}

inline std::uint64_t shuffle_stream(const TrainConfig& cfg, int client_id,
                                    int layer, int stage, int epoch) {
  std::uint64_t s = derive_seed(cfg.seed, kStreamShuffle);
  s = derive_seed(s, static_cast<std::uint64_t>(client_id));
  s = derive_seed(s, static_cast<std::uint64_t>(layer));
  s = derive_seed(s, static_cast<std::uint64_t>(stage));
  return derive_seed(s, static_cast<std::uint64_t>(epoch));
}

}  // namespace detail

struct LayerTrainResult {
  NetworkParams theta_prev;  // layers 1..l-1 after local fine-tuning
  LayerParams phi;           // trained layer l
};

// Three-stage local training of layer `layer` (1-based):
//   stage 1: E epochs on phi alone at alpha0, minimizing the new layer's own
//            loss with the frozen prefix (its outputs are cached once);
//   stage 2: E epochs on the full stack at alpha1;
//   stage 3: E epochs at alpha2;
// then the beta step per beta_mode, and the stack is split back into
// {theta_prev, phi}.
inline LayerTrainResult train_layer_local(int client_id, int layer,
                                          NetworkParams theta_prev,
                                          LayerParams phi, const Batch& data,
                                          const TrainConfig& cfg,
                                          TrainLog* log = nullptr) {
  validate_train_config(cfg);
  if (layer < 1) throw std::invalid_argument("layer index must be >= 1");
  if (theta_prev.depth() != layer - 1)
    throw std::invalid_argument("prefix depth must equal layer-1");
  check_network_batch(theta_prev, data);

  TrainStats local_stats;
  const auto record = [&](int stage, int epoch, double loss_value) {
    if (log) log->epochs.push_back({client_id, layer, stage, epoch, loss_value});
  };

  // Stage 1: the prefix is frozen, so each sample's input to the new layer is
  // a constant; run the epochs on a one-layer stack fed those inputs.
  {
    Batch stage1 = data;
    if (theta_prev.depth() > 0)
      stage1.x0 = forward(theta_prev, data).post.back();
    NetworkParams single;
    single.layers.push_back(std::move(phi));
    const std::vector<double> rates{cfg.alpha0};
    for (int e = 1; e <= cfg.epochs; ++e) {
      const double lv =
          detail::run_epoch(single, stage1, rates, LossMode::kLastLayer,
                            cfg.minibatch,
                            detail::shuffle_stream(cfg, client_id, layer, 1, e),
                            local_stats);
      record(1, e, lv);
    }
    phi = std::move(single.layers.front());
  }

  // Stages 2 and 3 train the combined stack from the shared start point.
  NetworkParams full = std::move(theta_prev);
  full.layers.push_back(std::move(phi));
  const auto stage_rates = [&](double alpha) {
    std::vector<double> rates(layer);
    for (int i = 1; i <= layer; ++i) {
      const double decay = cfg.beta_mode == BetaMode::kLrDecay
                               ? std::pow(cfg.beta, layer - i)
                               : 1.0;
      rates[i - 1] = alpha * decay;
    }
    return rates;
  };
  for (int stage = 2; stage <= 3; ++stage) {
    const std::vector<double> rates =
        stage_rates(stage == 2 ? cfg.alpha1 : cfg.alpha2);
    for (int e = 1; e <= cfg.epochs; ++e) {
      const double lv = detail::run_epoch(
          full, data, rates, cfg.loss_mode, cfg.minibatch,
          detail::shuffle_stream(cfg, client_id, layer, stage, e), local_stats);
      record(stage, e, lv);
    }
  }

  if (cfg.beta_mode == BetaMode::kLiteralWeightScale) {
    for (LayerParams& p : full.layers) {
      p.v *= cfg.beta;
      p.w *= cfg.beta;
      p.theta *= cfg.beta;
    }
  }
  ++local_stats.beta_steps;

  LayerTrainResult res;
  res.phi = std::move(full.layers.back());
  full.layers.pop_back();
  res.theta_prev = std::move(full);
  if (log) {
    log->stats.epoch_sweeps += local_stats.epoch_sweeps;
    log->stats.beta_steps += local_stats.beta_steps;
    log->stats.theta_clamps += local_stats.theta_clamps;
  }
  return res;
}

// Fresh parameters for layer `layer` (1-based), shared by the centralized
// trainer and the federation server so both sides initialize identically.
inline LayerParams make_layer_init(const SensingMatrix& a, int layer,
                                   const TrainConfig& cfg) {
  InitOptions opt;
  opt.mode = cfg.init_mode;
  opt.step = cfg.init_step;
  opt.lambda = cfg.init_lambda;
  opt.perturb_std = cfg.init_perturb;
  const std::uint64_t seed =
      derive_seed(derive_seed(cfg.seed, kStreamLayerInit),
                  static_cast<std::uint64_t>(layer));
  return init_layer(a.rows(), a.cols(), &a, opt, seed);
}

// Layer-wise training with all data in one place; this is the centralized
// baseline and, by construction, the K=1 degenerate case of the federation.
inline NetworkParams train_centralized(const Dataset& ds, const SensingMatrix& a,
                                       const TrainConfig& cfg,
                                       TrainLog* log = nullptr) {
  validate_train_config(cfg);
  const Batch batch = make_batch(ds);
  NetworkParams theta;
  for (int l = 1; l <= cfg.layers; ++l) {
    LayerParams phi0 = make_layer_init(a, l, cfg);
    LayerTrainResult res =
        train_layer_local(0, l, std::move(theta), std::move(phi0), batch, cfg, log);
    theta = std::move(res.theta_prev);
    theta.layers.push_back(std::move(res.phi));
  }
  return theta;
}

}  // namespace fedcs
