#pragma once

// Shallow-tree regressor with a sparse low-dimensional projection.
//
// An input x (length D) is projected to z = Z x (length d). Starting at the
// root, every node k on the root-to-leaf path contributes
//     (w_k . z) * tanh(sigma * (v_k . z))
// and internal nodes route left when theta_k . z <= 0, right otherwise. The
// prediction is a scalar offset plus the sum of the path contributions.
//
// All parameters are trained jointly by mini-batch gradient descent with the
// route of each example frozen within a step. After every epoch Z and the
// node parameters are projected back onto their sparsity budgets by hard
// thresholding. Parameters are stored as 32-bit floats in the model file, and
// trained models are rounded to float precision so a file round trip leaves
// predictions bit-identical.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfk/detail/random.hpp"
#include "pfk/error.hpp"
#include "pfk/matrix.hpp"

namespace pfk {

inline constexpr int kMaxTreeDepth = 10;
inline constexpr int kMaxProjDim = 256;

struct BonsaiConfig {
  int depth = 3;
  int proj_dim = 10;
  int input_dim = 9;
  double sigma = 1.0;
  double sparsity_z = 0.3;      // fraction of Z entries kept
  double sparsity_nodes = 0.5;  // fraction kept in each of w, v, theta
  double learning_rate = 0.05;
  int epochs = 200;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
  double grad_clip = 1.0;  // max global gradient norm per step; <= 0 disables

  std::size_t node_count() const noexcept { return (std::size_t{1} << (depth + 1)) - 1; }
  std::size_t internal_count() const noexcept { return (std::size_t{1} << depth) - 1; }

  void validate() const {
    if (depth < 0 || depth > kMaxTreeDepth)
      throw ValidationError("depth", "must lie in [0, " + std::to_string(kMaxTreeDepth) + "]");
    if (proj_dim < 1 || proj_dim > kMaxProjDim)
      throw ValidationError("proj_dim", "must lie in [1, " + std::to_string(kMaxProjDim) + "]");
    if (input_dim < 1) throw ValidationError("input_dim", "must be at least 1");
    if (static_cast<long>(proj_dim) * input_dim > 65535)
      throw ValidationError("input_dim", "projection exceeds 65535 entries");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma", "must be positive");
    if (!(sparsity_z > 0.0 && sparsity_z <= 1.0)) throw ValidationError("sparsity_z", "must lie in (0, 1]");
    if (!(sparsity_nodes > 0.0 && sparsity_nodes <= 1.0))
      throw ValidationError("sparsity_nodes", "must lie in (0, 1]");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ValidationError("learning_rate", "must be positive");
    if (epochs < 1) throw ValidationError("epochs", "must be at least 1");
    if (batch_size < 1) throw ValidationError("batch_size", "must be at least 1");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ValidationError("l2", "must be non-negative");
    if (std::isnan(grad_clip)) throw ValidationError("grad_clip", "must be a number");
  }

  bool operator==(const BonsaiConfig&) const = default;
};

/// Trainable parameters; also the shape of a gradient.
struct BonsaiParams {
  std::vector<double> projection;  // Z: proj_dim x input_dim, row-major
  std::vector<double> predictor;   // w: node_count x proj_dim
  std::vector<double> gate;        // v: node_count x proj_dim
  std::vector<double> branch;      // theta: internal_count x proj_dim
  double bias = 0.0;

  bool operator==(const BonsaiParams&) const = default;
};

struct BonsaiModel {
  BonsaiConfig config;
  BonsaiParams params;

  bool operator==(const BonsaiModel&) const = default;
};

inline BonsaiParams zero_params(const BonsaiConfig& c) {
  const auto d = static_cast<std::size_t>(c.proj_dim);
  BonsaiParams p;
  p.projection.assign(d * static_cast<std::size_t>(c.input_dim), 0.0);
  p.predictor.assign(c.node_count() * d, 0.0);
  p.gate.assign(c.node_count() * d, 0.0);
  p.branch.assign(c.internal_count() * d, 0.0);
  return p;
}

inline void round_to_f32(BonsaiParams& p) {
  auto round = [](std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  };
  round(p.projection);
  round(p.predictor);
  round(p.gate);
  round(p.branch);
  p.bias = static_cast<double>(static_cast<float>(p.bias));
}

/// Seeded uniform(-1, 1) / sqrt(d) parameters, offset 0. Z starts dense and is
/// sparsified by the first thresholding step of training.
inline BonsaiModel init_model(const BonsaiConfig& config) {
  config.validate();
  BonsaiModel m{config, zero_params(config)};
  detail::Rng rng(detail::derive_seed(config.seed, 0x696e6974ULL));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.proj_dim));
  for (auto* group : {&m.params.projection, &m.params.predictor, &m.params.gate, &m.params.branch}) {
    for (double& x : *group) x = rng.uniform(-scale, scale);
  }
  round_to_f32(m.params);
  return m;
}

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

struct ForwardPass {
  std::array<double, kMaxProjDim> z;
  std::array<std::size_t, kMaxTreeDepth + 1> path;
  std::size_t path_len = 0;
};

inline void check_input(const BonsaiModel& m, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(m.config.input_dim))
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(m.config.input_dim));
}

inline void project(const BonsaiModel& m, std::span<const double> x, double* z) noexcept {
  const auto d = static_cast<std::size_t>(m.config.proj_dim);
  const std::size_t in = x.size();
  for (std::size_t r = 0; r < d; ++r) z[r] = dot(&m.params.projection[r * in], x.data(), in);
}

/// Projection plus root-to-leaf route. Ties (theta . z == 0) go left.
inline void forward(const BonsaiModel& m, std::span<const double> x, ForwardPass& f) noexcept {
  const auto d = static_cast<std::size_t>(m.config.proj_dim);
  const std::size_t internal = m.config.internal_count();
  project(m, x, f.z.data());
  std::size_t k = 0;
  f.path_len = 0;
  for (;;) {
    f.path[f.path_len++] = k;
    if (k >= internal) break;
    k = dot(&m.params.branch[k * d], f.z.data(), d) > 0.0 ? 2 * k + 2 : 2 * k + 1;
  }
}

inline double path_output(const BonsaiModel& m, const ForwardPass& f) noexcept {
  const auto d = static_cast<std::size_t>(m.config.proj_dim);
  double y = m.params.bias;
  for (std::size_t i = 0; i < f.path_len; ++i) {
    const std::size_t k = f.path[i];
    const double a = dot(&m.params.predictor[k * d], f.z.data(), d);
    const double u = dot(&m.params.gate[k * d], f.z.data(), d);
    y += a * std::tanh(m.config.sigma * u);
  }
  return y;
}

}  // namespace detail

inline double predict(const BonsaiModel& model, std::span<const double> x) {
  detail::check_input(model, x);
  detail::ForwardPass f;
  detail::forward(model, x, f);
  return detail::path_output(model, f);
}

/// Node indices visited by x, root first.
inline std::vector<std::size_t> route(const BonsaiModel& model, std::span<const double> x) {
  detail::check_input(model, x);
  detail::ForwardPass f;
  detail::forward(model, x, f);
  return {f.path.begin(), f.path.begin() + static_cast<std::ptrdiff_t>(f.path_len)};
}

namespace detail {
inline void check_batch(const BonsaiModel& m, const FeatureMatrix& X, std::span<const double> y,
                        std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (X.cols() != static_cast<std::size_t>(m.config.input_dim))
    throw std::invalid_argument("feature matrix width does not match model input_dim");
  if (X.rows() != y.size()) throw std::invalid_argument("feature and target row counts differ");
  for (auto i : batch)
    if (i >= X.rows()) throw std::out_of_range("batch index out of range");
}
}  // namespace detail

/// Smooth training objective over `batch` with routes frozen:
///   (1 / 2n) sum (f(x_i) - y_i)^2 + (l2 / 2) (|Z|^2 + |w|^2 + |v|^2 + |theta|^2)
inline double objective(const BonsaiModel& model, const FeatureMatrix& X, std::span<const double> y,
                        std::span<const std::size_t> batch) {
  detail::check_batch(model, X, y, batch);
  detail::ForwardPass f;
  double sse = 0.0;
  for (auto i : batch) {
    detail::forward(model, X.row(i), f);
    const double r = detail::path_output(model, f) - y[i];
    sse += r * r;
  }
  double reg = 0.0;
  for (const auto* g : {&model.params.projection, &model.params.predictor, &model.params.gate, &model.params.branch})
    for (double v : *g) reg += v * v;
  return sse / (2.0 * static_cast<double>(batch.size())) + 0.5 * model.config.l2 * reg;
}

/// Analytic gradient of objective() for the rows in `batch`. Routing is held
/// fixed, so theta only receives the L2 term.
inline BonsaiParams gradient(const BonsaiModel& model, const FeatureMatrix& X, std::span<const double> y,
                             std::span<const std::size_t> batch) {
  detail::check_batch(model, X, y, batch);
  const auto& c = model.config;
  const auto& p = model.params;
  const auto d = static_cast<std::size_t>(c.proj_dim);
  const auto in = static_cast<std::size_t>(c.input_dim);
  BonsaiParams g = zero_params(c);
  detail::ForwardPass f;
  std::array<double, kMaxProjDim> dz;

  for (auto i : batch) {
    const auto x = X.row(i);
    detail::forward(model, x, f);
    const double r = detail::path_output(model, f) - y[i];
    std::fill_n(dz.begin(), d, 0.0);
    for (std::size_t s = 0; s < f.path_len; ++s) {
      const std::size_t k = f.path[s];
      const double* w = &p.predictor[k * d];
      const double* v = &p.gate[k * d];
      const double a = detail::dot(w, f.z.data(), d);
      const double t = std::tanh(c.sigma * detail::dot(v, f.z.data(), d));
      const double gate_slope = a * c.sigma * (1.0 - t * t);
      for (std::size_t j = 0; j < d; ++j) {
        g.predictor[k * d + j] += r * t * f.z[j];
        g.gate[k * d + j] += r * gate_slope * f.z[j];
        dz[j] += r * (t * w[j] + gate_slope * v[j]);
      }
    }
    for (std::size_t row = 0; row < d; ++row)
      for (std::size_t col = 0; col < in; ++col) g.projection[row * in + col] += dz[row] * x[col];
    g.bias += r;
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  auto finish = [&](std::vector<double>& grad, const std::vector<double>& param) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad[i] * inv_n + c.l2 * param[i];
  };
  finish(g.projection, p.projection);
  finish(g.predictor, p.predictor);
  finish(g.gate, p.gate);
  finish(g.branch, p.branch);
  g.bias *= inv_n;
  return g;
}

inline BonsaiParams gradient(const BonsaiModel& model, const FeatureMatrix& X, std::span<const double> y) {
  std::vector<std::size_t> all(X.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gradient(model, X, y, all);
}

/// Entries kept under a budget: ceil(budget * len), guarding against
/// representation error such as 0.3 * 90 = 27.000000000000004.
inline std::size_t budget_count(std::size_t len, double budget) {
  const double raw = budget * static_cast<double>(len);
  const double rounded = std::round(raw);
  const double kept = std::abs(raw - rounded) < 1e-9 * std::max(1.0, raw) ? rounded : std::ceil(raw);
  return std::min(len, static_cast<std::size_t>(kept));
}

/// Keeps the budget_count(len, budget) largest-magnitude entries in place and
/// zeroes the rest. Equal magnitudes prefer the lower index.
inline void hard_threshold(std::span<double> values, double budget) {
  const std::size_t keep = budget_count(values.size(), budget);
  if (keep >= values.size()) return;
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const double ma = std::abs(values[a]), mb = std::abs(values[b]);
                     return ma != mb ? ma > mb : a < b;
                   });
  for (auto it = order.begin() + static_cast<std::ptrdiff_t>(keep); it != order.end(); ++it) values[*it] = 0.0;
}

inline std::vector<double> hard_threshold(std::vector<double> values, double budget) {
  hard_threshold(std::span<double>(values), budget);
  return values;
}

inline std::size_t nonzero_count(std::span<const double> v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

/// Projects Z onto its budget and each node group (w, v, theta) onto the node budget.
inline void apply_budgets(BonsaiModel& m) {
  hard_threshold(std::span<double>(m.params.projection), m.config.sparsity_z);
  hard_threshold(std::span<double>(m.params.predictor), m.config.sparsity_nodes);
  hard_threshold(std::span<double>(m.params.gate), m.config.sparsity_nodes);
  hard_threshold(std::span<double>(m.params.branch), m.config.sparsity_nodes);
}

/// Rescales g so its global L2 norm is at most max_norm (no-op when max_norm <= 0).
inline void clip_gradient(BonsaiParams& g, double max_norm) {
  if (!(max_norm > 0.0)) return;
  double sq = g.bias * g.bias;
  for (const auto* v : {&g.projection, &g.predictor, &g.gate, &g.branch})
    for (double x : *v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto* v : {&g.projection, &g.predictor, &g.gate, &g.branch})
    for (double& x : *v) x *= scale;
  g.bias *= scale;
}

struct TrainReport {
  std::vector<double> epoch_loss;  // training MSE after each epoch
  std::size_t nnz_projection = 0;
  std::size_t nnz_predictor = 0;
  std::size_t nnz_gate = 0;
  std::size_t nnz_branch = 0;
  double wall_time_ms = 0.0;
  std::uint64_t seed = 0;
};

struct FitResult {
  BonsaiModel model;
  TrainReport report;
};

inline double training_mse(const BonsaiModel& m, const FeatureMatrix& X, std::span<const double> y) {
  double sse = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double r = predict(m, X.row(i)) - y[i];
    sse += r * r;
  }
  return sse / static_cast<double>(X.rows());
}

/// Mini-batch gradient descent from `model`, using its config for the
/// training hyperparameters. The output offset starts at the target mean.
inline FitResult fit(BonsaiModel model, const FeatureMatrix& X, std::span<const double> y) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& c = model.config;
  c.validate();
  if (X.rows() == 0 || y.empty()) throw ValidationError("records", "cannot train on empty data");
  if (X.rows() != y.size()) throw ValidationError("records", "feature and target row counts differ");
  if (X.cols() != static_cast<std::size_t>(c.input_dim))
    throw ValidationError("input_dim", "feature matrix has " + std::to_string(X.cols()) + " columns, model expects " +
                                           std::to_string(c.input_dim));
  if (X.rows() < static_cast<std::size_t>(c.batch_size))
    throw ValidationError("batch_size", "fewer training rows than the batch size");
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (double v : X.row(i))
      if (!std::isfinite(v)) throw ValidationError("features", "non-finite feature value", i);
    if (!std::isfinite(y[i])) throw ValidationError("ln_kf", "non-finite target", i);
  }

  model.params.bias = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  detail::Rng rng(detail::derive_seed(c.seed, 0x666974ULL));
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(c.batch_size);

  TrainReport report;
  report.seed = c.seed;
  report.epoch_loss.reserve(static_cast<std::size_t>(c.epochs));
  auto step = [&](std::vector<double>& p, const std::vector<double>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= c.learning_rate * g[i];
  };
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      auto g = gradient(model, X, y, std::span<const std::size_t>(order).subspan(start, len));
      clip_gradient(g, c.grad_clip);
      step(model.params.projection, g.projection);
      step(model.params.predictor, g.predictor);
      step(model.params.gate, g.gate);
      step(model.params.branch, g.branch);
      model.params.bias -= c.learning_rate * g.bias;
    }
    apply_budgets(model);
    report.epoch_loss.push_back(training_mse(model, X, y));
  }
  round_to_f32(model.params);

  report.nnz_projection = nonzero_count(model.params.projection);
  report.nnz_predictor = nonzero_count(model.params.predictor);
  report.nnz_gate = nonzero_count(model.params.gate);
  report.nnz_branch = nonzero_count(model.params.branch);
  report.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

inline FitResult train(const BonsaiConfig& config, const FeatureMatrix& X, std::span<const double> y) {
  return fit(init_model(config), X, y);
}

// ---------------------------------------------------------------------------
// Binary model format (little-endian), see docs/model-format.md:
//
//   "BNSI" | u8 version | u8 depth | u16 proj_dim | u16 input_dim
//   | f64 sigma | f64 sparsity_z | f64 sparsity_nodes | f32 bias
//   | u16 nnz | nnz x (u16 flat index into Z, f32 value)
//   | per node, breadth-first: masked(w_k) masked(v_k) [masked(theta_k) if internal]
//
// masked(vec) is a ceil(d / 8)-byte presence bitmap (bit j of byte j / 8 marks
// entry j nonzero, least significant bit first) followed by one f32 for every
// set bit, in index order.

inline constexpr std::array<std::uint8_t, 4> kModelMagic = {'B', 'N', 'S', 'I'};
inline constexpr std::uint8_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 4 + 1 + 1 + 2 + 2 + 8 + 8 + 8 + 4;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xff));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>((v >> s) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>((v >> s) & 0xff));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return data_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) throw FormatError(pos_, std::string("truncated while reading ") + what);
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void write_masked(ByteWriter& w, const double* v, std::size_t d) {
  for (std::size_t byte = 0; byte < (d + 7) / 8; ++byte) {
    std::uint8_t mask = 0;
    for (std::size_t bit = 0; bit < 8 && byte * 8 + bit < d; ++bit)
      if (v[byte * 8 + bit] != 0.0) mask |= static_cast<std::uint8_t>(1u << bit);
    w.u8(mask);
  }
  for (std::size_t j = 0; j < d; ++j)
    if (v[j] != 0.0) w.f32(v[j]);
}

inline void read_masked(ByteReader& r, double* v, std::size_t d) {
  std::vector<bool> present(d, false);
  for (std::size_t byte = 0; byte < (d + 7) / 8; ++byte) {
    const std::size_t at = r.offset();
    const std::uint8_t mask = r.u8("node mask");
    for (std::size_t bit = 0; bit < 8; ++bit) {
      if (!(mask & (1u << bit))) continue;
      if (byte * 8 + bit >= d) throw FormatError(at, "mask bit beyond vector length");
      present[byte * 8 + bit] = true;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (!present[j]) {
      v[j] = 0.0;
      continue;
    }
    const std::size_t at = r.offset();
    v[j] = r.f32("node value");
    if (!std::isfinite(v[j]) || v[j] == 0.0) throw FormatError(at, "node value must be finite and nonzero");
  }
}

}  // namespace detail

/// Encodes the model. Parameters are written as f32; see round_to_f32.
inline std::vector<std::uint8_t> serialize(const BonsaiModel& model) {
  const auto& c = model.config;
  const auto& p = model.params;
  const auto d = static_cast<std::size_t>(c.proj_dim);
  detail::ByteWriter w;
  for (auto b : kModelMagic) w.u8(b);
  w.u8(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(c.depth));
  w.u16(static_cast<std::uint16_t>(c.proj_dim));
  w.u16(static_cast<std::uint16_t>(c.input_dim));
  w.f64(c.sigma);
  w.f64(c.sparsity_z);
  w.f64(c.sparsity_nodes);
  w.f32(p.bias);

  std::vector<std::size_t> nz;
  for (std::size_t i = 0; i < p.projection.size(); ++i)
    if (p.projection[i] != 0.0) nz.push_back(i);
  w.u16(static_cast<std::uint16_t>(nz.size()));
  for (auto i : nz) {
    w.u16(static_cast<std::uint16_t>(i));
    w.f32(p.projection[i]);
  }
  for (std::size_t k = 0; k < c.node_count(); ++k) {
    detail::write_masked(w, &p.predictor[k * d], d);
    detail::write_masked(w, &p.gate[k * d], d);
    if (k < c.internal_count()) detail::write_masked(w, &p.branch[k * d], d);
  }
  return w.take();
}

/// Decodes a model file. Training-only fields (learning rate, epochs, batch
/// size, seed, l2) are not stored and come back at their defaults.
inline BonsaiModel deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  for (auto b : kModelMagic) {
    const std::size_t at = r.offset();
    if (r.u8("magic") != b) throw FormatError(at, "bad magic, not a BNSI model");
  }
  {
    const std::size_t at = r.offset();
    const auto version = r.u8("version");
    if (version != kModelFormatVersion)
      throw FormatError(at, "unsupported model format version " + std::to_string(version));
  }
  BonsaiConfig c;
  const std::size_t config_at = r.offset();
  c.depth = r.u8("depth");
  c.proj_dim = r.u16("proj_dim");
  c.input_dim = r.u16("input_dim");
  c.sigma = r.f64("sigma");
  c.sparsity_z = r.f64("sparsity_z");
  c.sparsity_nodes = r.f64("sparsity_nodes");
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(config_at, std::string("invalid config block: ") + e.what());
  }

  BonsaiModel m{c, zero_params(c)};
  {
    const std::size_t at = r.offset();
    m.params.bias = r.f32("bias");
    if (!std::isfinite(m.params.bias)) throw FormatError(at, "non-finite bias");
  }
  const std::size_t count_at = r.offset();
  const std::size_t nnz = r.u16("projection entry count");
  if (nnz > m.params.projection.size()) throw FormatError(count_at, "more projection entries than Z holds");
  long previous = -1;
  for (std::size_t e = 0; e < nnz; ++e) {
    const std::size_t at = r.offset();
    const std::size_t idx = r.u16("projection index");
    if (idx >= m.params.projection.size() || static_cast<long>(idx) <= previous)
      throw FormatError(at, "projection indices must be increasing and inside Z");
    previous = static_cast<long>(idx);
    const std::size_t vat = r.offset();
    const double v = r.f32("projection value");
    if (!std::isfinite(v) || v == 0.0) throw FormatError(vat, "projection value must be finite and nonzero");
    m.params.projection[idx] = v;
  }
  const auto d = static_cast<std::size_t>(c.proj_dim);
  for (std::size_t k = 0; k < c.node_count(); ++k) {
    detail::read_masked(r, &m.params.predictor[k * d], d);
    detail::read_masked(r, &m.params.gate[k * d], d);
    if (k < c.internal_count()) detail::read_masked(r, &m.params.branch[k * d], d);
  }
  if (!r.done()) throw FormatError(r.offset(), "trailing bytes after model");
  return m;
}

inline std::size_t model_size(const BonsaiModel& model) { return serialize(model).size(); }

}  // namespace pfk
