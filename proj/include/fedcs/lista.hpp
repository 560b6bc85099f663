#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedcs/ista.hpp"
#include "fedcs/text_io.hpp"

namespace fedcs {

// Trainables of one unfolded layer: x_out = shrink_theta(V y + W x_in).
struct LayerParams {
  Matrix v;      // N x M
  Matrix w;      // N x N
  double theta = 0.0;

  int n() const { return static_cast<int>(v.rows()); }
  int m() const { return static_cast<int>(v.cols()); }
};

struct NetworkParams {
  std::vector<LayerParams> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  int n() const { return layers.empty() ? 0 : layers.front().n(); }
  int m() const { return layers.empty() ? 0 : layers.front().m(); }
};

struct LayerGrad {
  Matrix dv;
  Matrix dw;
  double dtheta = 0.0;
};

// Shape-congruent with the NetworkParams it differentiates. `loss` carries
// the objective value at the point where the gradient was taken (the forward
// pass computes it anyway).
struct GradientBundle {
  std::vector<LayerGrad> layers;
  double loss = 0.0;
};

// Sample batch in column form: column s of x_true/y/x0 is one sample.
struct Batch {
  Matrix x_true;  // N x S
  Matrix y;       // M x S
  Matrix x0;      // N x S, initial iterate (zero by default)

  int size() const { return static_cast<int>(y.cols()); }
};

inline Batch make_batch(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("batch must be non-empty");
  Batch b;
  const int s = static_cast<int>(indices.size());
  b.x_true.resize(ds.n, s);
  b.y.resize(ds.m, s);
  for (int j = 0; j < s; ++j) {
    const Sample& sample = ds.samples.at(indices[j]);
    b.x_true.col(j) = sample.x;
    b.y.col(j) = sample.y;
  }
  b.x0 = Matrix::Zero(ds.n, s);
  return b;
}

inline Batch make_batch(const Dataset& ds) {
  std::vector<int> all(ds.size());
  for (int i = 0; i < ds.size(); ++i) all[i] = i;
  return make_batch(ds, all);
}

// Pre- and post-activations of every layer for one batch.
struct ForwardTrace {
  std::vector<Matrix> pre;   // z_i = V_i y + W_i x_{i-1}
  std::vector<Matrix> post;  // xhat_i = shrink_{theta_i}(z_i)

  const Matrix& estimate(int layer_1based) const { return post.at(layer_1based - 1); }
  const Matrix& final_estimate(const Batch& b) const {
    return post.empty() ? b.x0 : post.back();
  }
};

enum class InitMode { kIstaTied, kRandom };
enum class LossMode { kSumLayers, kLastLayer };

struct InitOptions {
  InitMode mode = InitMode::kIstaTied;
  double step = 0.0;         // 0 = derive 0.9 / sigma_max^2 from A
  double lambda = 0.1;       // tied mode: theta = lambda * step
  double perturb_std = 0.0;  // additive Gaussian noise on V and W (tied mode)
  double random_theta = 0.05;
};

inline void add_gaussian_noise(Matrix& m, Rng& rng, double std_dev) {
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] += std_dev * rng.gaussian();
}

// Tied mode reproduces one ISTA iteration: V = t A^T, W = I - t A^T A,
// theta = lambda t. Random mode draws N(0, 1/M)-scaled entries.
inline LayerParams init_layer(int m, int n, const SensingMatrix* a,
                              const InitOptions& opt, std::uint64_t seed) {
  if (m <= 0 || n <= 0) throw std::invalid_argument("layer dims must be positive");
  LayerParams phi;
  Rng rng(seed);
  if (opt.mode == InitMode::kIstaTied) {
    if (!a) throw std::invalid_argument("ista-tied init requires the sensing matrix");
    if (a->rows() != m || a->cols() != n)
      throw std::invalid_argument("sensing matrix does not match layer dims");
    const double t = opt.step > 0.0 ? opt.step : default_step(*a);
    phi.v = t * a->entries.transpose();
    phi.w = Matrix::Identity(n, n) - t * (a->entries.transpose() * a->entries);
    phi.theta = opt.lambda * t;
    if (opt.perturb_std > 0.0) {
      add_gaussian_noise(phi.v, rng, opt.perturb_std);
      add_gaussian_noise(phi.w, rng, opt.perturb_std);
    }
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    phi.v.resize(n, m);
    phi.w.resize(n, n);
    double* p = phi.v.data();
    for (Eigen::Index i = 0; i < phi.v.size(); ++i) p[i] = scale * rng.gaussian();
    p = phi.w.data();
    for (Eigen::Index i = 0; i < phi.w.size(); ++i) p[i] = scale * rng.gaussian();
    phi.theta = opt.random_theta;
  }
  return phi;
}

inline void check_network_batch(const NetworkParams& params, const Batch& b) {
  if (b.size() < 1) throw std::invalid_argument("batch must be non-empty");
  if (b.x0.rows() != b.x_true.rows() || b.x0.cols() != b.x_true.cols() ||
      b.y.cols() != b.x_true.cols())
    throw std::invalid_argument("batch blocks disagree on dimensions");
  for (const LayerParams& phi : params.layers) {
    if (phi.v.rows() != b.x_true.rows() || phi.v.cols() != b.y.rows() ||
        phi.w.rows() != phi.w.cols() || phi.w.rows() != phi.v.rows())
      throw std::invalid_argument("layer dims do not match batch");
  }
}

inline ForwardTrace forward(const NetworkParams& params, const Batch& b) {
  check_network_batch(params, b);
  ForwardTrace trace;
  trace.pre.reserve(params.depth());
  trace.post.reserve(params.depth());
  const Matrix* x_prev = &b.x0;
  for (const LayerParams& phi : params.layers) {
    Matrix z(phi.v.rows(), b.size());
    z.noalias() = phi.v * b.y;
    z.noalias() += phi.w * (*x_prev);
    Matrix xhat = z;
    soft_threshold_in_place(xhat, phi.theta);
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(xhat));
    x_prev = &trace.post.back();
  }
  return trace;
}

// Single-sample convenience wrapper.
inline ForwardTrace forward(const NetworkParams& params, const Vector& y,
                            const Vector& x0) {
  Batch b;
  b.y = y;
  b.x0 = x0;
  b.x_true = Matrix::Zero(x0.size(), 1);
  return forward(params, b);
}

inline double loss_from_trace(const NetworkParams& params, const Batch& b,
                              const ForwardTrace& trace, LossMode mode) {
  double total = 0.0;
  const int l = params.depth();
  for (int i = 0; i < l; ++i) {
    if (mode == LossMode::kLastLayer && i != l - 1) continue;
    total += (trace.post[i] - b.x_true).squaredNorm();
  }
  return total;
}

// Multi-layer training loss: squared error of every layer's estimate, summed
// over the batch. kLastLayer keeps only the deepest layer's term.
inline double loss(const NetworkParams& params, const Batch& b,
                   LossMode mode = LossMode::kSumLayers) {
  const ForwardTrace trace = forward(params, b);
  return loss_from_trace(params, b, trace, mode);
}

// Exact reverse-mode gradients. Subgradient convention at the shrink kink
// |z| = theta: the inactive branch (derivative 0). Per entry,
//   d xhat / d z     = 1 if |z| > theta else 0
//   d xhat / d theta = -sign(z) if |z| > theta else 0.
// With the multi-layer loss, each layer's residual enters both directly and
// through every downstream layer.
inline GradientBundle backward(const NetworkParams& params, const Batch& b,
                               LossMode mode = LossMode::kSumLayers) {
  const ForwardTrace trace = forward(params, b);
  const int l = params.depth();
  GradientBundle g;
  g.layers.resize(l);
  g.loss = loss_from_trace(params, b, trace, mode);
  if (l == 0) return g;

  Matrix grad_x = Matrix::Zero(b.x_true.rows(), b.size());
  Matrix active(b.x_true.rows(), b.size());
  for (int i = l - 1; i >= 0; --i) {
    const LayerParams& phi = params.layers[i];
    if (mode == LossMode::kSumLayers || i == l - 1)
      grad_x += 2.0 * (trace.post[i] - b.x_true);

    // active <- d xhat / d z, then fold into the incoming cotangent.
    const Matrix& z = trace.pre[i];
    for (Eigen::Index e = 0; e < z.size(); ++e)
      active.data()[e] = std::abs(z.data()[e]) > phi.theta ? grad_x.data()[e] : 0.0;

    double dtheta = 0.0;
    for (Eigen::Index e = 0; e < z.size(); ++e) {
      const double ze = z.data()[e];
      if (ze > 0.0)
        dtheta -= active.data()[e];
      else if (ze < 0.0)
        dtheta += active.data()[e];
    }
    g.layers[i].dtheta = dtheta;
    g.layers[i].dv.noalias() = active * b.y.transpose();
    const Matrix& x_prev = i == 0 ? b.x0 : trace.post[i - 1];
    g.layers[i].dw.noalias() = active * x_prev.transpose();
    if (i > 0) grad_x.noalias() = phi.w.transpose() * active;
  }
  return g;
}

inline void check_congruent(const NetworkParams& params, const GradientBundle& g) {
  if (g.layers.size() != params.layers.size())
    throw std::invalid_argument("gradient depth does not match network");
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    if (g.layers[i].dv.rows() != params.layers[i].v.rows() ||
        g.layers[i].dv.cols() != params.layers[i].v.cols() ||
        g.layers[i].dw.rows() != params.layers[i].w.rows() ||
        g.layers[i].dw.cols() != params.layers[i].w.cols())
      throw std::invalid_argument("gradient shape does not match network");
  }
}

// In-place update with one rate per layer; theta is clamped at 0 afterwards.
// Returns how many thetas the clamp actually moved.
inline int apply_update(NetworkParams& params, const GradientBundle& g,
                        const std::vector<double>& layer_rates) {
  check_congruent(params, g);
  if (layer_rates.size() != params.layers.size())
    throw std::invalid_argument("one learning rate per layer required");
  int clamped = 0;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const double lr = layer_rates[i];
    params.layers[i].v -= lr * g.layers[i].dv;
    params.layers[i].w -= lr * g.layers[i].dw;
    params.layers[i].theta -= lr * g.layers[i].dtheta;
    if (params.layers[i].theta < 0.0) {
      params.layers[i].theta = 0.0;
      ++clamped;
    }
  }
  return clamped;
}

inline NetworkParams sgd_step(const NetworkParams& params, const GradientBundle& g,
                              double lr) {
  if (lr < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  NetworkParams out = params;
  apply_update(out, g, std::vector<double>(params.layers.size(), lr));
  return out;
}

inline std::uint64_t params_hash(const NetworkParams& params) {
  std::uint64_t h = kFnvOffset;
  for (const LayerParams& phi : params.layers) {
    h = hash_doubles(h, phi.v.data(), static_cast<std::size_t>(phi.v.size()));
    h = hash_doubles(h, phi.w.data(), static_cast<std::size_t>(phi.w.size()));
    h = hash_doubles(h, &phi.theta, 1);
  }
  return h;
}

// --- checkpoint / transport text format ---------------------------------
// Checkpoint: header "L M N", then per layer a theta line, the V block
// (N rows x M) and the W block (N rows x N). A transport payload is one
// layer block without the header.

inline void append_layer_block(std::string& out, const LayerParams& phi) {
  append_double(out, phi.theta);
  out += '\n';
  for (Eigen::Index i = 0; i < phi.v.rows(); ++i) {
    for (Eigen::Index j = 0; j < phi.v.cols(); ++j) {
      if (j) out += ' ';
      append_double(out, phi.v(i, j));
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < phi.w.rows(); ++i) {
    for (Eigen::Index j = 0; j < phi.w.cols(); ++j) {
      if (j) out += ' ';
      append_double(out, phi.w(i, j));
    }
    out += '\n';
  }
}

inline std::string serialize_layer(const LayerParams& phi) {
  std::string out;
  append_layer_block(out, phi);
  return out;
}

inline LayerParams layer_from_reader(TokenReader& r, int m, int n) {
  LayerParams phi;
  phi.theta = r.read_double();
  phi.v = matrix_from_reader(r, n, m);
  phi.w = matrix_from_reader(r, n, n);
  return phi;
}

inline LayerParams parse_layer(const std::string& payload, int m, int n,
                               const std::string& origin) {
  TokenReader r(payload, origin);
  LayerParams phi = layer_from_reader(r, m, n);
  r.expect_end();
  return phi;
}

inline std::string checkpoint_to_text(const NetworkParams& params) {
  std::string out;
  out += std::to_string(params.depth());
  out += ' ';
  out += std::to_string(params.m());
  out += ' ';
  out += std::to_string(params.n());
  out += '\n';
  for (const LayerParams& phi : params.layers) append_layer_block(out, phi);
  return out;
}

inline NetworkParams parse_checkpoint_text(const std::string& text,
                                           const std::string& origin) {
  TokenReader r(text, origin);
  const long long l = r.read_int();
  const long long m = r.read_int();
  const long long n = r.read_int();
  if (l < 0) r.fail("negative depth");
  if (l > 0 && (m <= 0 || n <= 0)) r.fail("bad checkpoint dims");
  NetworkParams params;
  params.layers.reserve(l);
  for (long long i = 0; i < l; ++i)
    params.layers.push_back(layer_from_reader(r, static_cast<int>(m), static_cast<int>(n)));
  r.expect_end();
  return params;
}

inline void save_checkpoint(const std::string& path, const NetworkParams& params) {
  write_file(path, checkpoint_to_text(params));
}

inline NetworkParams load_checkpoint(const std::string& path) {
  return parse_checkpoint_text(read_file(path), path);
}

}  // namespace fedcs
