#pragma once

#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedcs/federation.hpp"

namespace fedcs {

// Experiment description: sectioned key = value text. Unknown sections or
// keys fail the parse immediately; the full schema is listed in the README.
struct ExperimentConfig {
  // [problem]
  int m = 50;
  int n = 100;
  double p = 0.1;
  std::string matrix_file;  // empty = generate from the seed

  // [data]
  int train_per_client = 200;
  int test_size = 1000;
  MagnitudeDist magnitude_dist = MagnitudeDist::kGaussian;
  std::vector<int> client_sizes;  // empty = equal split

  // [train] + [federation]
  TrainConfig train;
  int clients = 4;
  int rounds = 5;
  int workers = 0;

  // [run]
  bool run_fed = true;
  bool run_central = true;
  bool run_ista = true;
  std::uint64_t seed = 1;
  std::string output = "out/exp";
  std::string label = "exp";
  double psnr_peak = 1.0;
};

// Comma list drawn from {fed, central, ista}; at least one must be named.
inline void set_methods(ExperimentConfig& cfg, const std::string& methods);

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class KeyValueFile {
 public:
  KeyValueFile(const std::string& text, std::string origin, bool sections)
      : origin_(std::move(origin)) {
    std::string section;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = text.find('\n', pos);
      std::string line = text.substr(
          pos, end == std::string::npos ? std::string::npos : end - pos);
      pos = end == std::string::npos ? text.size() + 1 : end + 1;
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (!sections || line.back() != ']')
          fail(line_no, "unexpected section header '" + line + "'");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) fail(line_no, "expected key = value");
      const std::string key =
          (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
      if (values_.count(key)) fail(line_no, "duplicate key '" + key + "'");
      values_[key] = trim(line.substr(eq + 1));
      lines_[key] = line_no;
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& def) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double get_double(const std::string& key, double def) {
    const std::string s = get_string(key, "");
    if (s.empty()) return def;
    double v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      fail_key(key, "bad number '" + s + "'");
    return v;
  }

  long long get_int(const std::string& key, long long def) {
    const std::string s = get_string(key, "");
    if (s.empty()) return def;
    long long v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      fail_key(key, "bad integer '" + s + "'");
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t def) {
    const std::string s = get_string(key, "");
    if (s.empty()) return def;
    std::uint64_t v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      fail_key(key, "bad seed '" + s + "'");
    return v;
  }

  std::vector<std::string> split_list(const std::string& key) {
    std::vector<std::string> out;
    const std::string s = get_string(key, "");
    std::size_t pos = 0;
    while (pos < s.size()) {
      std::size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      const std::string item = trim(s.substr(pos, comma - pos));
      if (!item.empty()) out.push_back(item);
      pos = comma + 1;
    }
    return out;
  }

  // Every key must have been consumed by a getter.
  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key))
        fail_key(key, "unknown key");
  }

  [[noreturn]] void fail(std::size_t line, const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + what);
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& what) const {
    auto it = lines_.find(key);
    const std::size_t line = it == lines_.end() ? 0 : it->second;
    throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + what +
                      " (key '" + key + "')");
  }

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  std::set<std::string> used_;
};

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& origin) {
  detail::KeyValueFile kv(text, origin, /*sections=*/true);
  ExperimentConfig cfg;

  cfg.m = static_cast<int>(kv.get_int("problem.m", cfg.m));
  cfg.n = static_cast<int>(kv.get_int("problem.n", cfg.n));
  cfg.p = kv.get_double("problem.p", cfg.p);
  cfg.matrix_file = kv.get_string("problem.matrix_file", "");

  cfg.train_per_client =
      static_cast<int>(kv.get_int("data.train_per_client", cfg.train_per_client));
  cfg.test_size = static_cast<int>(kv.get_int("data.test_size", cfg.test_size));
  const std::string dist = kv.get_string("data.magnitude_dist", "gaussian");
  if (dist == "gaussian")
    cfg.magnitude_dist = MagnitudeDist::kGaussian;
  else if (dist == "uniform")
    cfg.magnitude_dist = MagnitudeDist::kUniform;
  else if (dist == "rademacher")
    cfg.magnitude_dist = MagnitudeDist::kRademacher;
  else
    kv.fail_key("data.magnitude_dist", "unknown distribution '" + dist + "'");
  for (const std::string& item : kv.split_list("data.client_sizes")) {
    int v{};
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc{} || res.ptr != item.data() + item.size())
      kv.fail_key("data.client_sizes", "bad size '" + item + "'");
    cfg.client_sizes.push_back(v);
  }

  cfg.train.layers = static_cast<int>(kv.get_int("train.layers", 6));
  cfg.train.epochs = static_cast<int>(kv.get_int("train.epochs", 100));
  cfg.train.alpha0 = kv.get_double("train.alpha0", 5e-4);
  cfg.train.alpha1 = kv.get_double("train.alpha1", 0.2 * cfg.train.alpha0);
  cfg.train.alpha2 = kv.get_double("train.alpha2", 0.02 * cfg.train.alpha0);
  cfg.train.beta = kv.get_double("train.beta", 0.3);
  const std::string beta_mode = kv.get_string("train.beta_mode", "lr_decay");
  if (beta_mode == "lr_decay")
    cfg.train.beta_mode = BetaMode::kLrDecay;
  else if (beta_mode == "literal_weight_scale")
    cfg.train.beta_mode = BetaMode::kLiteralWeightScale;
  else
    kv.fail_key("train.beta_mode", "unknown mode '" + beta_mode + "'");
  const std::string loss_mode = kv.get_string("train.loss_mode", "sum_layers");
  if (loss_mode == "sum_layers")
    cfg.train.loss_mode = LossMode::kSumLayers;
  else if (loss_mode == "last_layer")
    cfg.train.loss_mode = LossMode::kLastLayer;
  else
    kv.fail_key("train.loss_mode", "unknown mode '" + loss_mode + "'");
  cfg.train.minibatch = static_cast<int>(kv.get_int("train.minibatch", 0));
  const std::string init = kv.get_string("train.init", "ista");
  if (init == "ista")
    cfg.train.init_mode = InitMode::kIstaTied;
  else if (init == "random")
    cfg.train.init_mode = InitMode::kRandom;
  else
    kv.fail_key("train.init", "unknown init '" + init + "'");
  cfg.train.init_step = kv.get_double("train.init_step", 0.0);
  cfg.train.init_lambda = kv.get_double("train.init_lambda", 0.1);
  cfg.train.init_perturb = kv.get_double("train.init_perturb", 1e-3);

  cfg.clients = static_cast<int>(kv.get_int("federation.clients", cfg.clients));
  cfg.rounds = static_cast<int>(kv.get_int("federation.rounds", cfg.rounds));
  cfg.workers = static_cast<int>(kv.get_int("federation.workers", cfg.workers));

  try {
    set_methods(cfg, kv.get_string("run.methods", "fed,central,ista"));
  } catch (const std::invalid_argument& e) {
    kv.fail_key("run.methods", e.what());
  }
  cfg.seed = kv.get_u64("run.seed", cfg.seed);
  cfg.train.seed = cfg.seed;
  cfg.output = kv.get_string("run.output", cfg.output);
  cfg.label = kv.get_string("run.label", cfg.label);
  cfg.psnr_peak = kv.get_double("run.psnr_peak", cfg.psnr_peak);

  kv.reject_unknown();

  // Cross-field validation before anything runs.
  if (cfg.m <= 0 || cfg.n <= 0 || cfg.m >= cfg.n)
    throw detail::ConfigError(origin + ": problem needs 0 < m < n");
  if (!(cfg.p > 0.0 && cfg.p < 1.0))
    throw detail::ConfigError(origin + ": p must lie in (0,1)");
  if (cfg.test_size < 1)
    throw detail::ConfigError(origin + ": test_size must be >= 1");
  if (cfg.train_per_client < 1 && cfg.client_sizes.empty())
    throw detail::ConfigError(origin + ": train_per_client must be >= 1");
  if (!cfg.client_sizes.empty() &&
      static_cast<int>(cfg.client_sizes.size()) != cfg.clients)
    throw detail::ConfigError(origin + ": client_sizes must list one entry per client");
  if (!(cfg.run_fed || cfg.run_central || cfg.run_ista))
    throw detail::ConfigError(origin + ": no methods selected");
  if (cfg.label.empty() || cfg.label.find(',') != std::string::npos)
    throw detail::ConfigError(origin + ": label must be non-empty and comma-free");
  if (cfg.output.empty())
    throw detail::ConfigError(origin + ": output must be non-empty");
  if (cfg.psnr_peak <= 0.0)
    throw detail::ConfigError(origin + ": psnr_peak must be positive");
  validate_train_config(cfg.train);
  FederationConfig fed{cfg.train, cfg.clients, cfg.rounds, cfg.workers};
  validate_federation_config(fed);
  return cfg;
}

inline void set_methods(ExperimentConfig& cfg, const std::string& methods) {
  cfg.run_fed = cfg.run_central = cfg.run_ista = false;
  std::size_t pos = 0;
  while (pos <= methods.size()) {
    std::size_t comma = methods.find(',', pos);
    if (comma == std::string::npos) comma = methods.size();
    const std::string item = detail::trim(methods.substr(pos, comma - pos));
    pos = comma + 1;
    if (item.empty()) continue;
    if (item == "fed")
      cfg.run_fed = true;
    else if (item == "central")
      cfg.run_central = true;
    else if (item == "ista")
      cfg.run_ista = true;
    else
      throw std::invalid_argument("unknown method '" + item + "'");
  }
  if (!(cfg.run_fed || cfg.run_central || cfg.run_ista))
    throw std::invalid_argument("no methods selected");
}

inline ExperimentConfig load_config_file(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

}  // namespace fedcs
