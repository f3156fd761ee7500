#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "btof/error.hpp"

namespace btof::models {

enum class KnnWeighting { uniform, inverse_distance };

struct KnnModel {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  int k = 1;
  KnnWeighting weighting = KnnWeighting::uniform;

  // Neighbors ordered by (distance, training row); ties go to the lower row.
  std::vector<Eigen::Index> neighbors(const Eigen::Ref<const Eigen::RowVectorXd>& q,
                                      std::vector<double>* dist2 = nullptr) const {
    const Eigen::Index n = X.rows();
    std::vector<double> d(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) d[static_cast<std::size_t>(r)] = (X.row(r) - q).squaredNorm();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double da = d[static_cast<std::size_t>(a)], db = d[static_cast<std::size_t>(b)];
      return da < db || (da == db && a < b);
    });
    idx.resize(static_cast<std::size_t>(k));
    if (dist2) {
      dist2->clear();
      for (auto i : idx) dist2->push_back(d[static_cast<std::size_t>(i)]);
    }
    return idx;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const {
    Eigen::VectorXd out(Q.rows());
    std::vector<double> d2;
    for (Eigen::Index r = 0; r < Q.rows(); ++r) {
      const auto idx = neighbors(Q.row(r), &d2);
      if (weighting == KnnWeighting::uniform) {
        double s = 0.0;
        for (auto i : idx) s += y(i);
        out(r) = s / static_cast<double>(idx.size());
        continue;
      }
      // Exact matches take all the weight.
      double s = 0.0, w = 0.0;
      bool exact = false;
      for (std::size_t k2 = 0; k2 < idx.size(); ++k2)
        if (d2[k2] == 0.0) {
          if (!exact) s = w = 0.0;
          exact = true;
          s += y(idx[k2]);
          w += 1.0;
        } else if (!exact) {
          const double wi = 1.0 / std::sqrt(d2[k2]);
          s += wi * y(idx[k2]);
          w += wi;
        }
      out(r) = s / w;
    }
    return out;
  }
};

inline KnnModel fit_knn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k,
                        KnnWeighting weighting = KnnWeighting::uniform) {
  if (k < 1) throw Error("knn: k must be >= 1");
  if (X.rows() != y.size()) throw Error("knn: X and y row counts differ");
  if (k > X.rows())
    throw Error("knn: k=" + std::to_string(k) + " exceeds training rows " + std::to_string(X.rows()));
  return KnnModel{X, y, k, weighting};
}

}  // namespace btof::models
