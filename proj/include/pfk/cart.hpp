#pragma once

// Plain CART regression tree: greedy variance-reduction splits on midpoints
// between consecutive distinct feature values. Used as an in-repo baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pfk/bonsai.hpp"
#include "pfk/error.hpp"
#include "pfk/matrix.hpp"

namespace pfk {

struct CartConfig {
  int max_depth = 32;
  int min_samples_leaf = 1;

  void validate() const {
    if (max_depth < 0 || max_depth > 64) throw ValidationError("max_depth", "must lie in [0, 64]");
    if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf", "must be at least 1");
  }
  bool operator==(const CartConfig&) const = default;
};

struct CartNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;  // mean target of the training rows reaching the node
  int left = -1;
  int right = -1;
  std::size_t samples = 0;

  bool leaf() const noexcept { return feature < 0; }
  bool operator==(const CartNode&) const = default;
};

/// Nodes in preorder; node 0 is the root. x[feature] <= threshold goes left.
struct CartModel {
  CartConfig config;
  int input_dim = 0;
  std::vector<CartNode> nodes;

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const CartNode& n) { return n.leaf(); }));
  }
  int depth() const {
    int best = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].leaf()) {
        stack.push_back({nodes[i].left, d + 1});
        stack.push_back({nodes[i].right, d + 1});
      }
    }
    return best;
  }
  bool operator==(const CartModel&) const = default;
};

struct CartSplit {
  int feature = -1;
  double threshold = 0.0;
  double reduction = 0.0;  // drop in summed squared error
};

namespace detail {

/// Best variance-reduction split of `rows`, or feature -1 when no split
/// with positive reduction honours min_leaf. Scans features in index order
/// and thresholds in ascending order, keeping the first strict maximum.
inline CartSplit best_cart_split(const FeatureMatrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                                 std::size_t min_leaf) {
  CartSplit best;
  const std::size_t n = rows.size();
  if (n < 2 * min_leaf) return best;
  double total = 0.0;
  for (auto r : rows) total += y[r];
  const double base = total * total / static_cast<double>(n);
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return X.at(a, f) < X.at(b, f); });
    double left_sum = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      left_sum += y[order[i - 1]];
      const double lo = X.at(order[i - 1], f);
      const double hi = X.at(order[i], f);
      if (!(lo < hi) || i < min_leaf || n - i < min_leaf) continue;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(i) +
                          right_sum * right_sum / static_cast<double>(n - i) - base;
      if (gain > best.reduction) {
        double mid = lo + (hi - lo) / 2.0;
        if (!(mid < hi)) mid = lo;
        best = {static_cast<int>(f), mid, gain};
      }
    }
  }
  return best;
}

inline int grow_cart(CartModel& m, const FeatureMatrix& X, std::span<const double> y, std::vector<std::size_t> rows,
                     int depth) {
  CartNode node;
  node.samples = rows.size();
  double sum = 0.0;
  for (auto r : rows) sum += y[r];
  node.value = sum / static_cast<double>(rows.size());
  const int index = static_cast<int>(m.nodes.size());
  m.nodes.push_back(node);

  const bool constant = std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y[r] == y[rows[0]]; });
  if (depth >= m.config.max_depth || constant) return index;
  const auto split = best_cart_split(X, y, rows, static_cast<std::size_t>(m.config.min_samples_leaf));
  if (split.feature < 0) return index;

  std::vector<std::size_t> left, right;
  for (auto r : rows) (X.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
  rows = {};
  m.nodes[index].feature = split.feature;
  m.nodes[index].threshold = split.threshold;
  const int l = grow_cart(m, X, y, std::move(left), depth + 1);
  const int r = grow_cart(m, X, y, std::move(right), depth + 1);
  m.nodes[index].left = l;
  m.nodes[index].right = r;
  return index;
}

}  // namespace detail

/// Greedy tree fit. The split search has no random component; `seed` is
/// accepted for interface symmetry with the bonsai trainer and ignored.
inline CartModel fit_cart(const FeatureMatrix& X, std::span<const double> y, const CartConfig& config,
                          std::uint64_t seed = 0) {
  (void)seed;
  config.validate();
  if (X.rows() == 0 || y.empty()) throw ValidationError("records", "cannot fit a tree on empty data");
  if (X.rows() != y.size()) throw ValidationError("records", "feature and target row counts differ");
  if (X.rows() < static_cast<std::size_t>(config.min_samples_leaf))
    throw ValidationError("min_samples_leaf", "more than the number of training rows");
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (double v : X.row(i))
      if (!std::isfinite(v)) throw ValidationError("features", "non-finite feature value", i);
    if (!std::isfinite(y[i])) throw ValidationError("ln_kf", "non-finite target", i);
  }
  CartModel m;
  m.config = config;
  m.input_dim = static_cast<int>(X.cols());
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  detail::grow_cart(m, X, y, std::move(rows), 0);
  return m;
}

inline CartModel fit_cart(const FeatureMatrix& X, std::span<const double> y, int max_depth, int min_samples_leaf,
                          std::uint64_t seed = 0) {
  return fit_cart(X, y, CartConfig{max_depth, min_samples_leaf}, seed);
}

inline std::size_t cart_leaf(const CartModel& m, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(m.input_dim))
    throw ValidationError("features", "expected " + std::to_string(m.input_dim) + " values, got " +
                                          std::to_string(x.size()));
  if (m.nodes.empty()) throw ValidationError("model", "empty tree");
  std::size_t i = 0;
  while (!m.nodes[i].leaf()) {
    const auto& n = m.nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

inline double predict_cart(const CartModel& m, std::span<const double> x) { return m.nodes[cart_leaf(m, x)].value; }

/// Sum of squared training residuals.
inline double cart_sse(const CartModel& m, const FeatureMatrix& X, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double r = predict_cart(m, X.row(i)) - y[i];
    s += r * r;
  }
  return s;
}

// Binary format (little-endian):
//   "CART" | u8 version | u16 input_dim | u16 max_depth | u32 min_samples_leaf
//   | u32 node count | nodes in preorder
// Internal node: u8 1 | u16 feature | f64 threshold. Leaf: u8 0 | f64 value.
// Training sample counts are not stored.

inline constexpr std::array<std::uint8_t, 4> kCartMagic = {'C', 'A', 'R', 'T'};
inline constexpr std::uint8_t kCartFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_cart(const CartModel& m) {
  detail::ByteWriter w;
  for (auto b : kCartMagic) w.u8(b);
  w.u8(kCartFormatVersion);
  w.u16(static_cast<std::uint16_t>(m.input_dim));
  w.u16(static_cast<std::uint16_t>(m.config.max_depth));
  w.u32(static_cast<std::uint32_t>(m.config.min_samples_leaf));
  w.u32(static_cast<std::uint32_t>(m.nodes.size()));
  for (const auto& n : m.nodes) {
    if (n.leaf()) {
      w.u8(0);
      w.f64(n.value);
    } else {
      w.u8(1);
      w.u16(static_cast<std::uint16_t>(n.feature));
      w.f64(n.threshold);
    }
  }
  return w.take();
}

namespace detail {

inline int read_cart_node(ByteReader& r, CartModel& m, std::size_t limit, int depth) {
  if (m.nodes.size() >= limit) throw FormatError(r.offset(), "more nodes than the declared count");
  if (depth > m.config.max_depth) throw FormatError(r.offset(), "tree deeper than max_depth");
  const std::size_t at = r.offset();
  const auto tag = r.u8("node tag");
  const int index = static_cast<int>(m.nodes.size());
  m.nodes.emplace_back();
  if (tag == 0) {
    const double v = r.f64("leaf value");
    if (!std::isfinite(v)) throw FormatError(at, "non-finite leaf value");
    m.nodes[index].value = v;
    return index;
  }
  if (tag != 1) throw FormatError(at, "unknown node tag");
  const int feature = r.u16("feature");
  if (feature >= m.input_dim) throw FormatError(at, "feature index out of range");
  const double t = r.f64("threshold");
  if (!std::isfinite(t)) throw FormatError(at, "non-finite threshold");
  m.nodes[index].feature = feature;
  m.nodes[index].threshold = t;
  const int l = read_cart_node(r, m, limit, depth + 1);
  const int rr = read_cart_node(r, m, limit, depth + 1);
  m.nodes[index].left = l;
  m.nodes[index].right = rr;
  return index;
}

}  // namespace detail

inline CartModel deserialize_cart(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  for (auto b : kCartMagic) {
    const std::size_t at = r.offset();
    if (r.u8("magic") != b) throw FormatError(at, "bad magic, not a CART model");
  }
  {
    const std::size_t at = r.offset();
    const auto v = r.u8("version");
    if (v != kCartFormatVersion) throw FormatError(at, "unsupported tree format version " + std::to_string(v));
  }
  CartModel m;
  const std::size_t config_at = r.offset();
  m.input_dim = r.u16("input_dim");
  m.config.max_depth = r.u16("max_depth");
  m.config.min_samples_leaf = static_cast<int>(r.u32("min_samples_leaf"));
  try {
    m.config.validate();
  } catch (const ValidationError& e) {
    throw FormatError(config_at, std::string("invalid config block: ") + e.what());
  }
  const std::size_t count_at = r.offset();
  const std::size_t count = r.u32("node count");
  if (count == 0) throw FormatError(count_at, "tree has no nodes");
  detail::read_cart_node(r, m, count, 0);
  if (m.nodes.size() != count) throw FormatError(r.offset(), "node count does not match the tree");
  if (!r.done()) throw FormatError(r.offset(), "trailing bytes after tree");
  return m;
}

inline std::size_t cart_size(const CartModel& m) { return serialize_cart(m).size(); }

}  // namespace pfk
