#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <ostream>

#include "fedcs/config.hpp"
#include "fedcs/ista.hpp"
#include "fedcs/svg_plot.hpp"

namespace fedcs {

inline constexpr const char* kMethodFed = "fed-cs";
inline constexpr const char* kMethodCentral = "lista";
inline constexpr const char* kMethodIsta = "ista";

struct MetricRecord {
  std::string experiment;
  std::string method;
  int layer = 0;  // network layer, or iteration for the classic solver
  double nmse_db = 0.0;
  double psnr = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string out_dir;
  std::vector<MetricRecord> metrics;
  FedResult fed;          // populated when the federated method ran
  NetworkParams central;  // populated when the centralized method ran
  TrainLog central_log;
  double ista_step = 0.0;
};

// Relative outputs land under $FED_UNROLL_OUT when it is set, which lets
// tests redirect everything without touching the configs.
inline std::string resolve_output_dir(const std::string& output) {
  namespace fs = std::filesystem;
  const fs::path p(output);
  if (p.is_absolute()) return p.string();
  if (const char* base = std::getenv("FED_UNROLL_OUT"))
    return (fs::path(base) / p).string();
  return p.string();
}

inline std::string metrics_to_csv(const std::vector<MetricRecord>& rows) {
  std::string out = "experiment,method,layer,nmse_db,psnr\n";
  for (const MetricRecord& r : rows) {
    out += r.experiment;
    out += ',';
    out += r.method;
    out += ',';
    out += std::to_string(r.layer);
    out += ',';
    append_double(out, r.nmse_db);
    out += ',';
    append_double(out, r.psnr);
    out += '\n';
  }
  return out;
}

inline std::string rounds_to_csv(const FedResult& fed) {
  std::string out = "layer,round,client_id,local_loss,bytes_sent\n";
  for (const RoundRecord& rec : fed.history) {
    for (std::size_t k = 0; k < rec.client_phis.size(); ++k) {
      out += std::to_string(rec.layer);
      out += ',';
      out += std::to_string(rec.round);
      out += ',';
      out += std::to_string(k);
      out += ',';
      append_double(out, rec.client_losses[k]);
      out += ',';
      out += std::to_string(rec.bytes_sent[k]);
      out += '\n';
    }
  }
  return out;
}

inline void append_train_log_csv(std::string& out, const std::string& method,
                                 const TrainLog& log) {
  for (const EpochRecord& e : log.epochs) {
    out += method;
    out += ',';
    out += std::to_string(e.client_id);
    out += ',';
    out += std::to_string(e.layer);
    out += ',';
    out += std::to_string(e.round);
    out += ',';
    out += std::to_string(e.stage);
    out += ',';
    out += std::to_string(e.epoch);
    out += ',';
    append_double(out, e.loss);
    out += '\n';
  }
}

// Per-layer test metrics of a trained stack.
inline std::vector<MetricRecord> network_metrics(const NetworkParams& net,
                                                 const Batch& test,
                                                 const std::string& experiment,
                                                 const std::string& method,
                                                 double peak) {
  std::vector<MetricRecord> rows;
  const ForwardTrace trace = forward(net, test);
  rows.reserve(net.depth());
  for (int i = 0; i < net.depth(); ++i)
    rows.push_back({experiment, method, i + 1, nmse_db(test.x_true, trace.post[i]),
                    psnr(test.x_true, trace.post[i], peak)});
  return rows;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const auto note = [&](const std::string& line) {
    if (log) *log << line << std::endl;
  };
  const auto seconds_since = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  ExperimentResult res;
  res.config = cfg;
  res.out_dir = resolve_output_dir(cfg.output);
  fs::create_directories(res.out_dir);
  const auto path = [&](const char* name) {
    return (fs::path(res.out_dir) / name).string();
  };

  const SensingMatrix a =
      cfg.matrix_file.empty()
          ? generate_sensing_matrix(cfg.m, cfg.n,
                                    derive_seed(cfg.seed, kStreamSensing))
          : wrap_sensing_matrix(load_matrix_file(cfg.matrix_file));
  if (a.rows() != cfg.m || a.cols() != cfg.n)
    throw std::invalid_argument("matrix_file shape disagrees with [problem] m,n");
  save_matrix_file(path("sensing_matrix.txt"), a.entries);

  const Dataset test = build_dataset(a, cfg.test_size, cfg.p, cfg.magnitude_dist,
                                     derive_seed(cfg.seed, kStreamTestData));
  save_dataset_file(path("test_set.txt"), test);
  const Batch test_batch = make_batch(test);

  std::vector<int> sizes = cfg.client_sizes;
  if (sizes.empty()) sizes.assign(cfg.clients, cfg.train_per_client);
  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
  const Dataset train = build_dataset(a, total, cfg.p, cfg.magnitude_dist,
                                      derive_seed(cfg.seed, kStreamTrainData));
  const Partition part = partition_dataset(train, cfg.clients, &sizes);
  save_dataset_file(path("train_set.txt"), train);
  note("[" + cfg.label + "] m=" + std::to_string(cfg.m) + " n=" +
       std::to_string(cfg.n) + " train=" + std::to_string(total) + " test=" +
       std::to_string(cfg.test_size));

  if (cfg.run_fed) {
    const auto t0 = std::chrono::steady_clock::now();
    note("[" + cfg.label + "] fed-cs: K=" + std::to_string(cfg.clients) +
         " C=" + std::to_string(cfg.rounds) + " L=" +
         std::to_string(cfg.train.layers) + " E=" +
         std::to_string(cfg.train.epochs));
    const FederationConfig fed_cfg{cfg.train, cfg.clients, cfg.rounds,
                                   cfg.workers};
    res.fed = fed_cs_train(train, part, a, fed_cfg);
    save_checkpoint(path("model_fed.txt"), res.fed.consensus);
    write_file(path("rounds.csv"), rounds_to_csv(res.fed));

    // Server-view NMSE after every communication round: closed consensus
    // prefixes plus that round's aggregate of the layer in training.
    std::string round_csv = "layer,round,nmse_db\n";
    NetworkParams closed;
    std::size_t idx = 0;
    for (int l = 1; l <= cfg.train.layers; ++l) {
      for (int c = 1; c <= cfg.rounds; ++c, ++idx) {
        NetworkParams net = closed;
        net.layers.push_back(res.fed.history[idx].aggregated);
        const ForwardTrace trace = forward(net, test_batch);
        round_csv += std::to_string(l);
        round_csv += ',';
        round_csv += std::to_string(c);
        round_csv += ',';
        append_double(round_csv, nmse_db(test_batch.x_true, trace.post.back()));
        round_csv += '\n';
      }
      closed.layers.push_back(res.fed.history[idx - 1].aggregated);
    }
    write_file(path("rounds_nmse.csv"), round_csv);
    PlotSpec round_plot;
    round_plot.x_col = "round";
    round_plot.y_col = "nmse_db";
    round_plot.series_col = "layer";
    round_plot.title = cfg.label + ": consensus by round";
    round_plot.x_label = "communication round";
    round_plot.y_label = "NMSE (dB)";
    write_file(path("nmse_vs_round.svg"),
               render_svg_text(parse_csv_text(round_csv), round_plot));

    const auto rows =
        network_metrics(res.fed.consensus, test_batch, cfg.label, kMethodFed,
                        cfg.psnr_peak);
    res.metrics.insert(res.metrics.end(), rows.begin(), rows.end());
    note("[" + cfg.label + "] fed-cs done in " +
         format_double(seconds_since(t0)) + "s, final nmse " +
         format_double(rows.back().nmse_db) + " dB");
  }

  if (cfg.run_central) {
    const auto t0 = std::chrono::steady_clock::now();
    note("[" + cfg.label + "] lista (centralized): L=" +
         std::to_string(cfg.train.layers) + " E=" +
         std::to_string(cfg.train.epochs));
    res.central = train_centralized(train, a, cfg.train, &res.central_log);
    save_checkpoint(path("model_central.txt"), res.central);
    const auto rows = network_metrics(res.central, test_batch, cfg.label,
                                      kMethodCentral, cfg.psnr_peak);
    res.metrics.insert(res.metrics.end(), rows.begin(), rows.end());
    note("[" + cfg.label + "] lista done in " +
         format_double(seconds_since(t0)) + "s, final nmse " +
         format_double(rows.back().nmse_db) + " dB");
  }

  if (cfg.run_ista) {
    res.ista_step = default_step(a);
    const int iters = cfg.train.layers;
    std::vector<Matrix> est(iters, Matrix::Zero(cfg.n, test.size()));
    for (int s = 0; s < test.size(); ++s) {
      IstaConfig ista_cfg;
      ista_cfg.lambda = default_lambda(a, test.samples[s].y);
      ista_cfg.step = res.ista_step;
      ista_cfg.iters = iters;
      const IstaResult r = ista_solve(a, test.samples[s].y, ista_cfg);
      for (int i = 0; i < iters; ++i) est[i].col(s) = r.iterates[i];
    }
    for (int i = 0; i < iters; ++i)
      res.metrics.push_back({cfg.label, kMethodIsta, i + 1,
                             nmse_db(test_batch.x_true, est[i]),
                             psnr(test_batch.x_true, est[i], cfg.psnr_peak)});
    note("[" + cfg.label + "] ista: " + std::to_string(iters) +
         " iterations, final nmse " +
         format_double(res.metrics.back().nmse_db) + " dB");
  }

  const std::string metrics_csv = metrics_to_csv(res.metrics);
  write_file(path("metrics.csv"), metrics_csv);

  std::string train_csv = "method,client_id,layer,round,stage,epoch,loss\n";
  if (cfg.run_fed) append_train_log_csv(train_csv, kMethodFed, res.fed.train_log);
  if (cfg.run_central)
    append_train_log_csv(train_csv, kMethodCentral, res.central_log);
  write_file(path("train_log.csv"), train_csv);

  PlotSpec plot;
  plot.x_col = "layer";
  plot.y_col = "nmse_db";
  plot.series_col = "method";
  plot.title = cfg.label;
  plot.x_label = "layer / iteration";
  plot.y_label = "NMSE (dB)";
  write_file(path("nmse_vs_layer.svg"),
             render_svg_text(parse_csv_text(metrics_csv), plot));

  if (log) {
    char line[128];
    *log << "\n  method    layer   nmse_db      psnr\n";
    for (std::size_t i = 0; i < res.metrics.size(); ++i) {
      // Final layer per method, in run order.
      if (i + 1 < res.metrics.size() &&
          res.metrics[i + 1].method == res.metrics[i].method)
        continue;
      const MetricRecord& r = res.metrics[i];
      std::snprintf(line, sizeof line, "  %-8s  %5d  %8.2f  %8.2f\n",
                    r.method.c_str(), r.layer, r.nmse_db, r.psnr);
      *log << line;
    }
    *log << "\n[" << cfg.label << "] wrote " << res.out_dir << std::endl;
  }
  return res;
}

enum class SweepAxis { kClients, kEpochs, kRounds };

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "clients") return SweepAxis::kClients;
  if (s == "epochs") return SweepAxis::kEpochs;
  if (s == "rounds") return SweepAxis::kRounds;
  throw std::invalid_argument("unknown sweep axis '" + s +
                              "' (want clients, epochs or rounds)");
}

inline const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kClients: return "clients";
    case SweepAxis::kEpochs: return "epochs";
    case SweepAxis::kRounds: return "rounds";
  }
  throw std::logic_error("bad sweep axis");
}

// Accepts either "2..8" (inclusive range) or a comma list "1,2,4".
inline std::vector<int> parse_sweep_values(const std::string& spec) {
  const auto parse_int = [&](const std::string& s) {
    int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::invalid_argument("bad sweep value '" + s + "'");
    return v;
  };
  std::vector<int> out;
  const std::size_t dots = spec.find("..");
  if (dots != std::string::npos) {
    const int lo = parse_int(spec.substr(0, dots));
    const int hi = parse_int(spec.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("sweep range is empty");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      std::size_t comma = spec.find(',', pos);
      if (comma == std::string::npos) comma = spec.size();
      const std::string item = detail::trim(spec.substr(pos, comma - pos));
      if (!item.empty()) out.push_back(parse_int(item));
      pos = comma + 1;
    }
  }
  if (out.empty()) throw std::invalid_argument("no sweep values given");
  for (int v : out)
    if (v < 1) throw std::invalid_argument("sweep values must be >= 1");
  return out;
}

struct SweepRow {
  int value = 0;
  std::string method;
  int layer = 0;
  double nmse_db = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kClients;
  std::vector<SweepRow> rows;
  std::string csv_path;
  std::string svg_path;
};

// Re-runs the experiment once per axis value. The master seed is shared, so
// the operator and the test set are identical across all points; training
// data grows with the client count on the clients axis (fixed per-client
// share) and is identical otherwise.
inline SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<int>& values,
                             std::ostream* log = nullptr) {
  if (values.empty()) throw std::invalid_argument("no sweep values given");
  if (axis == SweepAxis::kClients && !base.client_sizes.empty())
    throw std::invalid_argument(
        "clients sweep needs the equal split, not explicit client_sizes");
  const std::string axis_name = sweep_axis_name(axis);
  SweepResult sw;
  sw.axis = axis;
  for (int v : values) {
    ExperimentConfig cfg = base;
    cfg.output = base.output + "/" + axis_name + "-" + std::to_string(v);
    cfg.label = base.label + "-" + axis_name + std::to_string(v);
    switch (axis) {
      case SweepAxis::kClients: cfg.clients = v; break;
      case SweepAxis::kEpochs: cfg.train.epochs = v; break;
      case SweepAxis::kRounds: cfg.rounds = v; break;
    }
    const ExperimentResult r = run_experiment(cfg, log);
    for (const MetricRecord& m : r.metrics)
      sw.rows.push_back({v, m.method, m.layer, m.nmse_db});
  }

  namespace fs = std::filesystem;
  const std::string base_dir = resolve_output_dir(base.output);
  fs::create_directories(base_dir);

  std::string csv = "axis,value,method,layer,nmse_db\n";
  for (const SweepRow& r : sw.rows) {
    csv += axis_name;
    csv += ',';
    csv += std::to_string(r.value);
    csv += ',';
    csv += r.method;
    csv += ',';
    csv += std::to_string(r.layer);
    csv += ',';
    append_double(csv, r.nmse_db);
    csv += '\n';
  }
  sw.csv_path = (fs::path(base_dir) / ("sweep_" + axis_name + ".csv")).string();
  write_file(sw.csv_path, csv);

  CsvTable final_rows;
  final_rows.header = {"value", "method", "nmse_db"};
  for (const SweepRow& r : sw.rows)
    if (r.layer == base.train.layers)
      final_rows.rows.push_back(
          {std::to_string(r.value), r.method, format_double(r.nmse_db)});
  PlotSpec plot;
  plot.x_col = "value";
  plot.y_col = "nmse_db";
  plot.series_col = "method";
  plot.title = base.label + ": sweep over " + axis_name;
  plot.x_label = axis_name;
  plot.y_label = "final NMSE (dB)";
  sw.svg_path = (fs::path(base_dir) / ("sweep_" + axis_name + ".svg")).string();
  write_file(sw.svg_path, render_svg_text(final_rows, plot));
  if (log) *log << "[sweep] wrote " << sw.csv_path << std::endl;
  return sw;
}

// Metrics for a saved checkpoint against a saved test set.
inline std::vector<MetricRecord> evaluate_checkpoint_file(
    const std::string& model_path, const std::string& test_path,
    const std::string& experiment, const std::string& method, double peak) {
  const NetworkParams net = load_checkpoint(model_path);
  const Dataset test = load_dataset_file(test_path);
  if (test.n != net.n() || test.m != net.m())
    throw std::invalid_argument("checkpoint and dataset shapes disagree");
  return network_metrics(net, make_batch(test), experiment, method, peak);
}

// Plot description file: flat key = value, same syntax as the experiment
// config but without sections.
struct PlotFileSpec {
  PlotSpec plot;
  std::string out;
};

inline PlotFileSpec parse_plot_spec_text(const std::string& text,
                                         const std::string& origin) {
  detail::KeyValueFile kv(text, origin, /*sections=*/false);
  PlotFileSpec spec;
  spec.plot.x_col = kv.get_string("x", "");
  spec.plot.y_col = kv.get_string("y", "");
  spec.plot.series_col = kv.get_string("series", "");
  spec.plot.title = kv.get_string("title", "");
  spec.plot.x_label = kv.get_string("x_label", "");
  spec.plot.y_label = kv.get_string("y_label", "");
  spec.plot.width = static_cast<int>(kv.get_int("width", spec.plot.width));
  spec.plot.height = static_cast<int>(kv.get_int("height", spec.plot.height));
  spec.out = kv.get_string("out", "");
  kv.reject_unknown();
  if (spec.plot.x_col.empty() || spec.plot.y_col.empty())
    throw detail::ConfigError(origin + ": plot spec needs x and y columns");
  return spec;
}

inline PlotFileSpec load_plot_spec_file(const std::string& path) {
  return parse_plot_spec_text(read_file(path), path);
}

}  // namespace fedcs
