#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fedcs/experiment.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string output;
  std::string label;
  std::string methods;
  std::uint64_t seed = 0;
  int workers = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("config", opts.config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--output", opts.output, "override the output directory");
  cmd->add_option("--label", opts.label, "override the experiment label");
  cmd->add_option("--seed", opts.seed, "override the master seed");
  cmd->add_option("--workers", opts.workers,
                  "override the worker thread count (0 = one per client)");
  cmd->add_option("--methods", opts.methods,
                  "override the method list, e.g. fed,ista");
}

fedcs::ExperimentConfig load_with_overrides(const CLI::App* cmd,
                                            const CommonOpts& opts) {
  fedcs::ExperimentConfig cfg = fedcs::load_config_file(opts.config_path);
  if (cmd->count("--seed")) {
    cfg.seed = opts.seed;
    cfg.train.seed = opts.seed;
  }
  if (cmd->count("--output")) cfg.output = opts.output;
  if (cmd->count("--label")) cfg.label = opts.label;
  if (cmd->count("--workers")) cfg.workers = opts.workers;
  if (cmd->count("--methods")) fedcs::set_methods(cfg, opts.methods);
  if (cfg.label.empty() || cfg.label.find(',') != std::string::npos)
    throw std::invalid_argument("label must be non-empty and comma-free");
  if (cfg.output.empty()) throw std::invalid_argument("output must be non-empty");
  if (cfg.workers < 0) throw std::invalid_argument("workers must be >= 0");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated training of unfolded sparse-recovery networks"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
  add_common(run_cmd, run_opts);

  CommonOpts sweep_opts;
  std::string sweep_axis;
  std::string sweep_values;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "re-run an experiment along one axis");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--axis", sweep_axis, "clients, epochs or rounds")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "comma list or lo..hi range")
      ->required();

  std::string eval_model, eval_test, eval_out;
  std::string eval_label = "eval", eval_method;
  double eval_peak = 1.0;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score a saved model on a saved test set");
  eval_cmd->add_option("checkpoint", eval_model, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("dataset", eval_test, "test dataset")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--label", eval_label, "experiment column value");
  eval_cmd->add_option("--method", eval_method,
                       "method column value (default: checkpoint file stem)");
  eval_cmd->add_option("--peak", eval_peak, "peak signal value for psnr");
  eval_cmd->add_option("--out", eval_out, "also write the csv here");

  std::string plot_csv, plot_spec_path, plot_out;
  CLI::App* plot_cmd = app.add_subcommand("plot", "render a csv as an svg");
  plot_cmd->add_option("csv", plot_csv, "input csv")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("spec", plot_spec_path, "plot spec file (key = value)")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_out, "override the spec's output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const fedcs::ExperimentConfig cfg = load_with_overrides(run_cmd, run_opts);
      fedcs::run_experiment(cfg, &std::cout);
    } else if (*sweep_cmd) {
      const fedcs::ExperimentConfig cfg =
          load_with_overrides(sweep_cmd, sweep_opts);
      fedcs::run_sweep(cfg, fedcs::parse_sweep_axis(sweep_axis),
                       fedcs::parse_sweep_values(sweep_values), &std::cout);
    } else if (*eval_cmd) {
      if (eval_method.empty())
        eval_method = std::filesystem::path(eval_model).stem().string();
      const auto rows = fedcs::evaluate_checkpoint_file(
          eval_model, eval_test, eval_label, eval_method, eval_peak);
      const std::string csv = fedcs::metrics_to_csv(rows);
      std::cout << csv;
      if (!eval_out.empty()) fedcs::write_file(eval_out, csv);
    } else if (*plot_cmd) {
      fedcs::PlotFileSpec spec = fedcs::load_plot_spec_file(plot_spec_path);
      if (!plot_out.empty()) spec.out = plot_out;
      if (spec.out.empty())
        throw std::invalid_argument("no output path: set 'out' or pass --out");
      fedcs::render_svg_file(plot_csv, spec.plot, spec.out);
      std::cout << "wrote " << spec.out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
