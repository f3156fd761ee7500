#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "btof/error.hpp"
#include "btof/rng.hpp"

namespace btof::models {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

// Axis-aligned regression tree; x[feature] <= threshold goes left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X.row(r));
    return out;
  }

  int depth() const { return depth_from(0); }
  std::size_t leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
  }

 private:
  int depth_from(int i) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature < 0) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct TreeParams {
  int max_depth = 3;
  int min_leaf = 1;
  double feature_frac = 1.0;  // fraction of features tried at each split
};

// Rows sorted by (value, row index) for every feature. Computed once per
// design matrix and shared by all trees grown on it.
struct Presort {
  std::vector<std::vector<int>> order;

  explicit Presort(const Eigen::MatrixXd& X) : order(static_cast<std::size_t>(X.cols())) {
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
      auto& o = order[static_cast<std::size_t>(f)];
      o.resize(static_cast<std::size_t>(X.rows()));
      std::iota(o.begin(), o.end(), 0);
      std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }
  }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, std::span<const double> y, std::span<const int> weight,
              const TreeParams& params, Rng* rng)
      : X_(X), y_(y), w_(weight), params_(params), rng_(rng), go_left_(static_cast<std::size_t>(X.rows()), 0) {
    const auto d = static_cast<std::size_t>(X.cols());
    features_per_split_ = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(params.feature_frac * static_cast<double>(d))), 1, std::max<std::size_t>(d, 1));
  }

  RegressionTree build(std::vector<std::vector<int>> lists) {
    RegressionTree tree;
    tree_ = &tree;
    grow(std::move(lists), 0);
    return tree;
  }

 private:
  int grow(std::vector<std::vector<int>> lists, int depth) {
    const int id = static_cast<int>(tree_->nodes.size());
    tree_->nodes.emplace_back();
    // Node statistics are accumulated in one fixed order (feature 0's list).
    const auto& base = lists.front();
    double wsum = 0.0, ysum = 0.0;
    for (int r : base) {
      wsum += w_[static_cast<std::size_t>(r)];
      ysum += w_[static_cast<std::size_t>(r)] * y_[static_cast<std::size_t>(r)];
    }
    const double mean = ysum / wsum;
    tree_->nodes[static_cast<std::size_t>(id)].value = mean;
    if (depth >= params_.max_depth || wsum < 2.0 * params_.min_leaf) return id;

    double node_sq = 0.0;  // sum of w * (y - mean)^2
    for (int r : base) {
      const double c = y_[static_cast<std::size_t>(r)] - mean;
      node_sq += w_[static_cast<std::size_t>(r)] * c * c;
    }
    if (!(node_sq > 0.0)) return id;

    int best_f = -1;
    double best_thr = 0.0, best_gain = 1e-12 * node_sq;
    for (std::size_t f : candidate_features()) {
      const auto& list = lists[f];
      double wl = 0.0, sl = 0.0;  // sums of w and w * (y - mean) on the left
      for (std::size_t k = 0; k + 1 < list.size(); ++k) {
        const int r = list[k];
        wl += w_[static_cast<std::size_t>(r)];
        sl += w_[static_cast<std::size_t>(r)] * (y_[static_cast<std::size_t>(r)] - mean);
        const double xa = X_(r, static_cast<Eigen::Index>(f));
        const double xb = X_(list[k + 1], static_cast<Eigen::Index>(f));
        if (!(xa < xb)) continue;
        const double wr = wsum - wl;
        if (wl < params_.min_leaf || wr < params_.min_leaf) continue;
        // Centered sums: the right side carries -sl.
        const double gain = sl * sl / wl + sl * sl / wr;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = 0.5 * (xa + xb);
          if (!(best_thr < xb)) best_thr = xa;
        }
      }
    }
    if (best_f < 0) return id;

    for (int r : base) go_left_[static_cast<std::size_t>(r)] = X_(r, best_f) <= best_thr ? 1 : 0;
    std::vector<std::vector<int>> left(lists.size()), right(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      left[f].reserve(lists[f].size());
      right[f].reserve(lists[f].size());
      for (int r : lists[f]) (go_left_[static_cast<std::size_t>(r)] ? left[f] : right[f]).push_back(r);
    }
    lists.clear();
    lists.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int rr = grow(std::move(right), depth + 1);
    auto& node = tree_->nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = l;
    node.right = rr;
    return id;
  }

  // Ascending feature indices, so gain ties resolve to the lowest feature.
  std::vector<std::size_t> candidate_features() {
    const auto d = static_cast<std::size_t>(X_.cols());
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (features_per_split_ >= d || rng_ == nullptr) return all;
    for (std::size_t i = 0; i < features_per_split_; ++i) std::swap(all[i], all[i + uniform_index(*rng_, d - i)]);
    all.resize(features_per_split_);
    std::sort(all.begin(), all.end());
    return all;
  }

  const Eigen::MatrixXd& X_;
  std::span<const double> y_;
  std::span<const int> w_;
  TreeParams params_;
  Rng* rng_;
  std::vector<char> go_left_;
  std::size_t features_per_split_ = 1;
  RegressionTree* tree_ = nullptr;
};

}  // namespace detail

// Greedy squared-error tree. `weight[r]` is the multiplicity of row r (0
// excludes it); leaf values are weighted means. `rng` drives per-split feature
// subsampling and may be null when feature_frac = 1.
inline RegressionTree build_tree(const Eigen::MatrixXd& X, std::span<const double> y, const Presort& presort,
                                 std::span<const int> weight, const TreeParams& params, Rng* rng = nullptr) {
  if (params.max_depth < 0) throw Error("tree: max_depth must be >= 0");
  if (params.min_leaf < 1) throw Error("tree: min_leaf must be >= 1");
  if (!(params.feature_frac > 0.0 && params.feature_frac <= 1.0)) throw Error("tree: feature_frac must lie in (0, 1]");
  if (static_cast<Eigen::Index>(y.size()) != X.rows() || weight.size() != y.size())
    throw Error("tree: X, y and weight sizes differ");
  if (X.rows() == 0) throw Error("tree: no training rows");
  std::vector<std::vector<int>> lists(std::max<std::size_t>(presort.order.size(), 1));
  if (presort.order.empty()) {
    for (int r = 0; r < static_cast<int>(X.rows()); ++r)
      if (weight[static_cast<std::size_t>(r)] > 0) lists[0].push_back(r);
  } else {
    for (std::size_t f = 0; f < presort.order.size(); ++f)
      for (int r : presort.order[f])
        if (weight[static_cast<std::size_t>(r)] > 0) lists[f].push_back(r);
  }
  if (lists[0].empty()) throw Error("tree: all sample weights are zero");
  detail::TreeBuilder builder(X, y, weight, params, rng);
  return builder.build(std::move(lists));
}

inline RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params) {
  const Presort presort(X);
  const std::vector<int> ones(static_cast<std::size_t>(X.rows()), 1);
  return build_tree(X, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), presort, ones, params);
}

}  // namespace btof::models
