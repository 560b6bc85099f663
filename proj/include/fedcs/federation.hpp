#pragma once

#include <chrono>
#include <cmath>
#include <thread>
#include <vector>

#include "fedcs/metrics.hpp"
#include "fedcs/trainer.hpp"

namespace fedcs {

struct FederationConfig {
  TrainConfig train;
  int clients = 10;  // K
  int rounds = 10;   // C
  int workers = 0;   // 0 = one thread per client
};

inline void validate_federation_config(const FederationConfig& cfg) {
  validate_train_config(cfg.train);
  if (cfg.clients < 1) throw std::invalid_argument("client count must be >= 1");
  if (cfg.rounds < 1) throw std::invalid_argument("round count must be >= 1");
  if (cfg.workers < 0) throw std::invalid_argument("worker count must be >= 0");
}

struct ClientState {
  int id = 0;
  std::vector<int> data_indices;
  NetworkParams theta;  // the client's local stack, depth l-1 mid-protocol
};

// One communication round: what each client sent, what the server made of it.
// The stored client params are the server-side deserialized payloads, so the
// aggregate is recomputable from this record alone.
struct RoundRecord {
  int layer = 0;
  int round = 0;
  std::vector<LayerParams> client_phis;
  std::vector<double> client_losses;       // local loss after local training
  std::vector<std::size_t> bytes_sent;     // payload size per client
  LayerParams aggregated;
  double wall_seconds = 0.0;  // in-memory only, never serialized
};

struct FedResult {
  NetworkParams consensus;
  std::vector<RoundRecord> history;
  std::vector<std::size_t> final_bytes;  // full-model upload sizes, per client
  TrainLog train_log;
};

// Entrywise weighted average of V, W and theta. Weights must be non-negative
// and sum to 1 within 1e-12.
inline LayerParams aggregate_layer(const std::vector<LayerParams>& phis,
                                   const std::vector<double>& weights) {
  if (phis.empty()) throw std::invalid_argument("aggregate_layer: empty input");
  if (weights.size() != phis.size())
    throw std::invalid_argument("aggregate_layer: one weight per participant");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("aggregate_layer: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("aggregate_layer: weights must sum to 1");
  for (std::size_t k = 1; k < phis.size(); ++k) {
    if (phis[k].v.rows() != phis[0].v.rows() || phis[k].v.cols() != phis[0].v.cols() ||
        phis[k].w.rows() != phis[0].w.rows() || phis[k].w.cols() != phis[0].w.cols())
      throw std::invalid_argument("aggregate_layer: shape mismatch");
  }
  // Reduce in ascending participant order for bit-reproducibility.
  LayerParams out;
  out.v = weights[0] * phis[0].v;
  out.w = weights[0] * phis[0].w;
  out.theta = weights[0] * phis[0].theta;
  for (std::size_t k = 1; k < phis.size(); ++k) {
    out.v += weights[k] * phis[k].v;
    out.w += weights[k] * phis[k].w;
    out.theta += weights[k] * phis[k].theta;
  }
  return out;
}

inline NetworkParams aggregate_network(const std::vector<NetworkParams>& thetas,
                                       const std::vector<double>& weights) {
  if (thetas.empty()) throw std::invalid_argument("aggregate_network: empty input");
  const int depth = thetas.front().depth();
  for (const NetworkParams& t : thetas)
    if (t.depth() != depth)
      throw std::invalid_argument("aggregate_network: depth mismatch");
  NetworkParams out;
  out.layers.reserve(depth);
  std::vector<LayerParams> column(thetas.size());
  for (int i = 0; i < depth; ++i) {
    for (std::size_t k = 0; k < thetas.size(); ++k) column[k] = thetas[k].layers[i];
    out.layers.push_back(aggregate_layer(column, weights));
  }
  return out;
}

namespace detail {

// Static client-to-worker assignment; results land in per-client slots so
// the merge order is fixed regardless of worker count.
template <typename Fn>
inline void run_per_client(int clients, int workers, Fn&& fn) {
  const int pool = workers <= 0 ? clients : std::min(workers, clients);
  if (pool <= 1) {
    for (int k = 0; k < clients; ++k) fn(k);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (int w = 0; w < pool; ++w) {
    threads.emplace_back([&, w]() {
      for (int k = w; k < clients; k += pool) fn(k);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace detail

// Layer-wise federated training. For each layer, C rounds of: parallel local
// three-stage training from the current consensus layer, upload of that
// layer's parameters only (serialized, so payload bytes are realistic), and
// sample-count-weighted aggregation. Clients keep fine-tuning their own
// copies of earlier layers locally; those copies are only reconciled by the
// final full-model aggregation.
inline FedResult fed_cs_train(const Dataset& ds, const Partition& part,
                              const SensingMatrix& a, const FederationConfig& cfg) {
  validate_federation_config(cfg);
  if (part.clients() != cfg.clients)
    throw std::invalid_argument("partition does not match client count");
  for (const auto& idx : part.client_indices)
    if (idx.empty()) throw std::invalid_argument("client with no data");

  const std::vector<double> weights = partition_weights(part);
  const int k_clients = cfg.clients;

  std::vector<ClientState> clients(k_clients);
  std::vector<Batch> batches(k_clients);
  for (int k = 0; k < k_clients; ++k) {
    clients[k].id = k;
    clients[k].data_indices = part.client_indices[k];
    batches[k] = make_batch(ds, part.client_indices[k]);
  }

  FedResult result;
  struct ClientRoundOut {
    LayerParams phi;
    std::string payload;
    double local_loss = 0.0;
    TrainLog log;
  };

  for (int layer = 1; layer <= cfg.train.layers; ++layer) {
    LayerParams consensus_phi = make_layer_init(a, layer, cfg.train);
    for (int round = 1; round <= cfg.rounds; ++round) {
      const auto started = std::chrono::steady_clock::now();
      std::vector<ClientRoundOut> outs(k_clients);
      detail::run_per_client(k_clients, cfg.workers, [&](int k) {
        LayerTrainResult r =
            train_layer_local(k, layer, std::move(clients[k].theta),
                              consensus_phi, batches[k], cfg.train, &outs[k].log);
        clients[k].theta = std::move(r.theta_prev);
        // Local loss of the candidate stack (prefix + fresh layer).
        NetworkParams candidate = clients[k].theta;
        candidate.layers.push_back(r.phi);
        outs[k].local_loss = loss(candidate, batches[k], cfg.train.loss_mode);
        outs[k].payload = serialize_layer(r.phi);
        outs[k].phi = std::move(r.phi);
      });

      // Server side: drain the mailbox in client order and aggregate.
      RoundRecord rec;
      rec.layer = layer;
      rec.round = round;
      for (int k = 0; k < k_clients; ++k) {
        rec.bytes_sent.push_back(outs[k].payload.size());
        rec.client_phis.push_back(
            parse_layer(outs[k].payload, a.rows(), a.cols(), "round payload"));
        rec.client_losses.push_back(outs[k].local_loss);
        for (EpochRecord& e : outs[k].log.epochs) e.round = round;
        result.train_log.epochs.insert(result.train_log.epochs.end(),
                                       outs[k].log.epochs.begin(),
                                       outs[k].log.epochs.end());
        result.train_log.stats.epoch_sweeps += outs[k].log.stats.epoch_sweeps;
        result.train_log.stats.beta_steps += outs[k].log.stats.beta_steps;
        result.train_log.stats.theta_clamps += outs[k].log.stats.theta_clamps;
      }
      consensus_phi = aggregate_layer(rec.client_phis, weights);
      rec.aggregated = consensus_phi;
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
              .count();
      result.history.push_back(std::move(rec));
    }
    // Layer close: every client appends the same consensus copy.
    for (int k = 0; k < k_clients; ++k)
      clients[k].theta.layers.push_back(consensus_phi);
  }

  // Final aggregation over the clients' full (locally drifted) stacks.
  std::vector<NetworkParams> finals(k_clients);
  for (int k = 0; k < k_clients; ++k) {
    const std::string payload = checkpoint_to_text(clients[k].theta);
    result.final_bytes.push_back(payload.size());
    finals[k] = parse_checkpoint_text(payload, "final payload");
  }
  result.consensus = aggregate_network(finals, weights);
  return result;
}

// Per-layer NMSE (dB) of the truncated network on a test batch.
inline std::vector<double> evaluate(const NetworkParams& theta, const Batch& test) {
  if (test.size() < 1) throw std::invalid_argument("evaluate: empty test set");
  const ForwardTrace trace = forward(theta, test);
  std::vector<double> out;
  out.reserve(theta.depth());
  for (int i = 0; i < theta.depth(); ++i)
    out.push_back(nmse_db(test.x_true, trace.post[i]));
  return out;
}

inline std::vector<double> evaluate(const NetworkParams& theta, const Dataset& test) {
  return evaluate(theta, make_batch(test));
}

}  // namespace fedcs
