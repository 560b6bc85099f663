#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedcs/federation.hpp"

using namespace fedcs;

namespace {

LayerParams constant_layer(int m, int n, double value, double theta) {
  LayerParams phi;
  phi.v = Matrix::Constant(n, m, value);
  phi.w = Matrix::Constant(n, n, value);
  phi.theta = theta;
  return phi;
}

FederationConfig tiny_fed_config(int clients, int rounds, int layers, int epochs) {
  FederationConfig cfg;
  cfg.clients = clients;
  cfg.rounds = rounds;
  cfg.train.layers = layers;
  cfg.train.epochs = epochs;
  cfg.train.alpha0 = 1e-3;
  cfg.train.alpha1 = 2e-4;
  cfg.train.alpha2 = 2e-5;
  return cfg;
}

}  // namespace

TEST_CASE("layer aggregation is the weighted entrywise average") {
  const LayerParams a = constant_layer(2, 3, 1.0, 0.4);
  const LayerParams b = constant_layer(2, 3, 3.0, 0.8);
  const LayerParams mix = aggregate_layer({a, b}, {0.25, 0.75});
  REQUIRE(mix.v(0, 0) == 0.25 * 1.0 + 0.75 * 3.0);
  REQUIRE(mix.w(2, 2) == 2.5);
  REQUIRE(mix.theta == 0.25 * 0.4 + 0.75 * 0.8);
}

TEST_CASE("aggregation validates weights and shapes") {
  const LayerParams a = constant_layer(2, 3, 1.0, 0.4);
  const LayerParams b = constant_layer(2, 3, 3.0, 0.8);
  REQUIRE_THROWS_AS(aggregate_layer({}, {}), std::invalid_argument);
  REQUIRE_THROWS_AS(aggregate_layer({a, b}, {0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(aggregate_layer({a, b}, {0.6, 0.6}), std::invalid_argument);
  REQUIRE_THROWS_AS(aggregate_layer({a, b}, {1.5, -0.5}), std::invalid_argument);
  const LayerParams c = constant_layer(2, 4, 1.0, 0.1);
  REQUIRE_THROWS_AS(aggregate_layer({a, c}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("aggregating one participant with weight one is the identity") {
  LayerParams a = constant_layer(3, 5, 0.0, 0.123);
  Rng rng(5);
  for (Eigen::Index i = 0; i < a.v.size(); ++i) a.v.data()[i] = rng.gaussian();
  for (Eigen::Index i = 0; i < a.w.size(); ++i) a.w.data()[i] = rng.gaussian();
  const LayerParams out = aggregate_layer({a}, {1.0});
  REQUIRE((out.v.array() == a.v.array()).all());
  REQUIRE((out.w.array() == a.w.array()).all());
  REQUIRE(out.theta == a.theta);
}

TEST_CASE("aggregation of equal layers returns them unchanged") {
  const LayerParams a = constant_layer(2, 3, 0.7, 0.2);
  const LayerParams out = aggregate_layer({a, a}, {0.5, 0.5});
  REQUIRE((out.v.array() == a.v.array()).all());
  REQUIRE(out.theta == a.theta);
}

TEST_CASE("grouped aggregation matches flat aggregation") {
  std::vector<LayerParams> phis;
  Rng rng(9);
  for (int k = 0; k < 4; ++k) {
    LayerParams phi = constant_layer(2, 3, 0.0, rng.uniform01());
    for (Eigen::Index i = 0; i < phi.v.size(); ++i) phi.v.data()[i] = rng.gaussian();
    for (Eigen::Index i = 0; i < phi.w.size(); ++i) phi.w.data()[i] = rng.gaussian();
    phis.push_back(std::move(phi));
  }
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  const LayerParams flat = aggregate_layer(phis, w);

  const LayerParams left = aggregate_layer({phis[0], phis[1]}, {1.0 / 3, 2.0 / 3});
  const LayerParams right = aggregate_layer({phis[2], phis[3]}, {3.0 / 7, 4.0 / 7});
  const LayerParams grouped = aggregate_layer({left, right}, {0.3, 0.7});
  REQUIRE((flat.v - grouped.v).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE((flat.w - grouped.w).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE(std::abs(flat.theta - grouped.theta) < 1e-12);
}

TEST_CASE("network aggregation works per layer and checks depth") {
  NetworkParams n1, n2;
  n1.layers = {constant_layer(2, 3, 1.0, 0.1), constant_layer(2, 3, 2.0, 0.2)};
  n2.layers = {constant_layer(2, 3, 3.0, 0.3), constant_layer(2, 3, 4.0, 0.4)};
  const NetworkParams out = aggregate_network({n1, n2}, {0.5, 0.5});
  REQUIRE(out.depth() == 2);
  REQUIRE(out.layers[0].v(0, 0) == 2.0);
  REQUIRE(out.layers[1].theta == Catch::Approx(0.3).epsilon(1e-14));

  NetworkParams shallow;
  shallow.layers = {constant_layer(2, 3, 1.0, 0.1)};
  REQUIRE_THROWS_AS(aggregate_network({n1, shallow}, {0.5, 0.5}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(aggregate_network({}, {}), std::invalid_argument);
}

TEST_CASE("clients with identical data produce identical payloads") {
  const SensingMatrix a = generate_sensing_matrix(4, 8, 60);
  Dataset half = build_dataset(a, 5, 0.2, MagnitudeDist::kGaussian, 61);
  Dataset ds = half;
  ds.samples.insert(ds.samples.end(), half.samples.begin(), half.samples.end());
  const std::vector<int> sizes{5, 5};
  const Partition part = partition_dataset(ds, 2, &sizes);

  FederationConfig cfg = tiny_fed_config(2, 2, 2, 3);
  const FedResult res = fed_cs_train(ds, part, a, cfg);

  for (const RoundRecord& rec : res.history) {
    REQUIRE(rec.client_phis.size() == 2);
    REQUIRE((rec.client_phis[0].v.array() == rec.client_phis[1].v.array()).all());
    REQUIRE((rec.client_phis[0].w.array() == rec.client_phis[1].w.array()).all());
    REQUIRE(rec.client_phis[0].theta == rec.client_phis[1].theta);
    REQUIRE((rec.aggregated.v.array() == rec.client_phis[0].v.array()).all());
    REQUIRE(rec.client_losses[0] == rec.client_losses[1]);
    REQUIRE(rec.bytes_sent[0] == rec.bytes_sent[1]);
  }
}

TEST_CASE("single client, single round reduces to centralized training") {
  const SensingMatrix a = generate_sensing_matrix(5, 10, 70);
  const Dataset ds = build_dataset(a, 8, 0.2, MagnitudeDist::kGaussian, 71);
  const Partition part = partition_dataset(ds, 1);

  FederationConfig cfg = tiny_fed_config(1, 1, 3, 4);
  const FedResult fed = fed_cs_train(ds, part, a, cfg);
  const NetworkParams central = train_centralized(ds, a, cfg.train);
  REQUIRE(checkpoint_to_text(fed.consensus) == checkpoint_to_text(central));
}

TEST_CASE("round records account for every byte and round-trip exactly") {
  const SensingMatrix a = generate_sensing_matrix(4, 8, 80);
  const Dataset ds = build_dataset(a, 9, 0.2, MagnitudeDist::kGaussian, 81);
  const std::vector<int> sizes{5, 4};
  const Partition part = partition_dataset(ds, 2, &sizes);

  FederationConfig cfg = tiny_fed_config(2, 2, 2, 2);
  const FedResult res = fed_cs_train(ds, part, a, cfg);

  REQUIRE(res.history.size() == 4);  // layers * rounds
  int slot = 0;
  for (int layer = 1; layer <= 2; ++layer)
    for (int round = 1; round <= 2; ++round) {
      const RoundRecord& rec = res.history[slot++];
      REQUIRE(rec.layer == layer);
      REQUIRE(rec.round == round);
      for (std::size_t k = 0; k < rec.client_phis.size(); ++k)
        REQUIRE(rec.bytes_sent[k] == serialize_layer(rec.client_phis[k]).size());
      const LayerParams redo = aggregate_layer(rec.client_phis, {5.0 / 9, 4.0 / 9});
      REQUIRE((redo.v.array() == rec.aggregated.v.array()).all());
    }
  REQUIRE(res.final_bytes.size() == 2);
  REQUIRE(res.final_bytes[0] > 0);

  // Train-log records carry the round they were produced in.
  REQUIRE(res.train_log.epochs.size() ==
          static_cast<std::size_t>(2 * 2 * 2 * 3 * cfg.train.epochs));
  for (const EpochRecord& e : res.train_log.epochs) {
    REQUIRE(e.round >= 1);
    REQUIRE(e.round <= 2);
  }
  REQUIRE(res.train_log.stats.beta_steps == 2 * 2 * 2);
}

TEST_CASE("early layers drift after their close, the last one cannot") {
  const SensingMatrix a = generate_sensing_matrix(4, 8, 90);
  const Dataset ds = build_dataset(a, 10, 0.2, MagnitudeDist::kGaussian, 91);
  const Partition part = partition_dataset(ds, 2);

  FederationConfig cfg = tiny_fed_config(2, 2, 3, 3);
  const FedResult res = fed_cs_train(ds, part, a, cfg);

  const auto close_aggregate = [&](int layer) {
    return res.history[(layer - 1) * cfg.rounds + (cfg.rounds - 1)].aggregated;
  };
  REQUIRE((res.consensus.layers[0].v - close_aggregate(1).v).norm() > 0.0);
  REQUIRE((res.consensus.layers[1].v - close_aggregate(2).v).norm() > 0.0);
  // Both clients hold the same copy of the last layer and weigh 1/2 each.
  REQUIRE((res.consensus.layers[2].v.array() == close_aggregate(3).v.array()).all());
  REQUIRE(res.consensus.layers[2].theta == close_aggregate(3).theta);
}

TEST_CASE("the worker pool size never changes the result") {
  const SensingMatrix a = generate_sensing_matrix(4, 8, 100);
  const Dataset ds = build_dataset(a, 9, 0.2, MagnitudeDist::kGaussian, 101);
  const Partition part = partition_dataset(ds, 3);

  FederationConfig cfg = tiny_fed_config(3, 2, 2, 2);
  cfg.train.minibatch = 2;
  const auto run_digest = [&](int workers) {
    cfg.workers = workers;
    const FedResult res = fed_cs_train(ds, part, a, cfg);
    std::string digest = checkpoint_to_text(res.consensus);
    for (const RoundRecord& rec : res.history) {
      digest += serialize_layer(rec.aggregated);
      for (const LayerParams& phi : rec.client_phis) digest += serialize_layer(phi);
    }
    return digest;
  };
  const std::string reference = run_digest(0);
  REQUIRE(run_digest(1) == reference);
  REQUIRE(run_digest(2) == reference);
  REQUIRE(run_digest(3) == reference);
}

TEST_CASE("federation validates partition and config") {
  const SensingMatrix a = generate_sensing_matrix(4, 8, 110);
  const Dataset ds = build_dataset(a, 6, 0.2, MagnitudeDist::kGaussian, 111);
  const Partition part = partition_dataset(ds, 2);

  FederationConfig cfg = tiny_fed_config(3, 1, 1, 1);
  REQUIRE_THROWS_AS(fed_cs_train(ds, part, a, cfg), std::invalid_argument);

  cfg.clients = 2;
  cfg.rounds = 0;
  REQUIRE_THROWS_AS(fed_cs_train(ds, part, a, cfg), std::invalid_argument);

  cfg.rounds = 1;
  Partition holed = part;
  holed.client_indices[1].clear();
  REQUIRE_THROWS_AS(fed_cs_train(ds, holed, a, cfg), std::invalid_argument);
}

TEST_CASE("evaluate reports per-layer nmse of the truncated stacks") {
  const SensingMatrix a = generate_sensing_matrix(4, 8, 120);
  const Dataset ds = build_dataset(a, 12, 0.25, MagnitudeDist::kGaussian, 121);
  NetworkParams net;
  InitOptions opt;
  for (int l = 0; l < 3; ++l) net.layers.push_back(init_layer(4, 8, &a, opt, l));

  const Batch test = make_batch(ds);
  const std::vector<double> curve = evaluate(net, test);
  REQUIRE(curve.size() == 3);

  const ForwardTrace trace = forward(net, test);
  for (int i = 0; i < 3; ++i) {
    double err = 0.0, pow = 0.0;
    for (int s = 0; s < test.size(); ++s) {
      err += (test.x_true.col(s) - trace.post[i].col(s)).squaredNorm();
      pow += test.x_true.col(s).squaredNorm();
    }
    REQUIRE(curve[i] ==
            Catch::Approx(10.0 * std::log10(err / pow)).epsilon(1e-12));
  }
  REQUIRE(evaluate(net, ds) == curve);
  REQUIRE_THROWS_AS(evaluate(net, Batch{}), std::invalid_argument);
}
