#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "btof/error.hpp"
#include "btof/parallel.hpp"
#include "btof/rng.hpp"
#include "btof/models/tree.hpp"

namespace btof::models {

namespace detail {

// Reorders rows by ascending key so that a fit sees the same data no matter
// how the caller ordered its rows. Keys must be distinct.
struct CanonicalRows {
  Eigen::MatrixXd X;
  std::vector<double> y;

  CanonicalRows(const Eigen::MatrixXd& X0, const Eigen::VectorXd& y0, std::span<const std::uint64_t> keys) {
    const auto n = static_cast<std::size_t>(X0.rows());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (!keys.empty()) {
      if (keys.size() != n) throw Error("row key count does not match rows");
      std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
      for (std::size_t i = 1; i < n; ++i)
        if (keys[perm[i]] == keys[perm[i - 1]]) throw Error("row keys must be distinct");
    }
    X.resize(X0.rows(), X0.cols());
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      X.row(static_cast<Eigen::Index>(i)) = X0.row(static_cast<Eigen::Index>(perm[i]));
      y[i] = y0(static_cast<Eigen::Index>(perm[i]));
    }
  }
};

}  // namespace detail

struct ForestParams {
  int n_estimators = 100;
  TreeParams tree{.max_depth = 5, .min_leaf = 1, .feature_frac = 1.0 / 3.0};
  bool bootstrap = true;
};

struct ForestModel {
  std::vector<RegressionTree> trees;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (const auto& t : trees) out += t.predict(X);
    return out / static_cast<double>(trees.size());
  }
};

// Bagged trees. Tree m draws its bootstrap and split features from
// derive_seed(seed, m). `row_keys` (optional) fixes a canonical row order so
// the fit is invariant to how rows were supplied.
inline ForestModel fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params,
                                     std::uint64_t seed, std::span<const std::uint64_t> row_keys = {},
                                     std::size_t threads = 1) {
  if (params.n_estimators < 1) throw Error("random_forest: n_estimators must be >= 1");
  if (X.rows() == 0) throw Error("random_forest: no training rows");
  const detail::CanonicalRows data(X, y, row_keys);
  const Presort presort(data.X);
  const auto n = static_cast<std::size_t>(data.X.rows());
  ForestModel model;
  model.trees.resize(static_cast<std::size_t>(params.n_estimators));
  parallel_for(model.trees.size(), threads, [&](std::size_t m) {
    Rng rng(derive_seed(seed, m));
    std::vector<int> weight(n, params.bootstrap ? 0 : 1);
    if (params.bootstrap)
      for (std::size_t k = 0; k < n; ++k) ++weight[uniform_index(rng, n)];
    model.trees[m] = build_tree(data.X, data.y, presort, weight, params.tree, &rng);
  });
  return model;
}

struct GbtParams {
  int n_estimators = 500;
  double learning_rate = 0.1;
  TreeParams tree{.max_depth = 3, .min_leaf = 1, .feature_frac = 1.0};
  double subsample = 1.0;  // fraction of rows per stage, drawn without replacement
};

struct GbtModel {
  double init = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  // Training mean squared error after stage m; train_loss[0] is for F_0.
  std::vector<double> train_loss;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), init);
    for (const auto& t : trees) out += learning_rate * t.predict(X);
    return out;
  }
};

// Stagewise squared-loss boosting: F_0 = mean(y), F_m = F_{m-1} + nu * tree_m,
// where tree_m is fit to the residuals y - F_{m-1}.
inline GbtModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbtParams& params,
                        std::uint64_t seed, std::span<const std::uint64_t> row_keys = {}) {
  if (params.n_estimators < 1) throw Error("gbt: n_estimators must be >= 1");
  if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) throw Error("gbt: learning_rate must lie in (0, 1]");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw Error("gbt: subsample must lie in (0, 1]");
  if (X.rows() == 0) throw Error("gbt: no training rows");
  const detail::CanonicalRows data(X, y, row_keys);
  const Presort presort(data.X);
  const auto n = static_cast<std::size_t>(data.X.rows());

  GbtModel model;
  model.learning_rate = params.learning_rate;
  model.init = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> F(n, model.init), resid(n);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (data.y[i] - F[i]) * (data.y[i] - F[i]);
    return s / static_cast<double>(n);
  };
  model.train_loss.push_back(mse());

  Rng rng(seed);
  std::vector<int> weight(n, 1);
  const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));
  std::vector<std::size_t> pool(n);
  model.trees.reserve(static_cast<std::size_t>(params.n_estimators));
  for (int m = 0; m < params.n_estimators; ++m) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = data.y[i] - F[i];
    if (take < n) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      std::fill(weight.begin(), weight.end(), 0);
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
        weight[pool[i]] = 1;
      }
    }
    model.trees.push_back(build_tree(data.X, resid, presort, weight, params.tree, &rng));
    const auto& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i)
      F[i] += params.learning_rate * tree.predict_row(data.X.row(static_cast<Eigen::Index>(i)));
    model.train_loss.push_back(mse());
  }
  return model;
}

}  // namespace btof::models
