#include <gtest/gtest.h>

#include <random>

#include "btof/models/model.hpp"

using namespace btof;
using namespace btof::models;

namespace {

Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Lowest-SSE single split over every feature and every midpoint.
double best_split_sse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  double best = (y.array() - y.mean()).square().sum();
  for (Eigen::Index f = 0; f < X.cols(); ++f)
    for (Eigen::Index a = 0; a < X.rows(); ++a) {
      const double thr = X(a, f);
      double sl = 0, sr = 0, nl = 0, nr = 0;
      for (Eigen::Index r = 0; r < X.rows(); ++r) (X(r, f) <= thr ? (sl += y(r), nl += 1) : (sr += y(r), nr += 1));
      if (nl == 0 || nr == 0) continue;
      double sse = 0;
      for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double mu = X(r, f) <= thr ? sl / nl : sr / nr;
        sse += (y(r) - mu) * (y(r) - mu);
      }
      best = std::min(best, sse);
    }
  return best;
}

}  // namespace

TEST(Knn, ExactMatchWithKOne) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = uniform_matrix(rng, 20, 3);
  const Eigen::VectorXd y = uniform_matrix(rng, 20, 1);
  const KnnModel m = fit_knn(X, y, 1);
  EXPECT_EQ(m.predict(X.row(7)), y.segment(7, 1));
}

TEST(Knn, KEqualsNIsGlobalMean) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = uniform_matrix(rng, 15, 2);
  const Eigen::VectorXd y = uniform_matrix(rng, 15, 1);
  const KnnModel m = fit_knn(X, y, 15);
  const Eigen::VectorXd p = m.predict(uniform_matrix(rng, 4, 2));
  for (Eigen::Index r = 0; r < p.size(); ++r) EXPECT_NEAR(p(r), y.mean(), 1e-14);
}

TEST(Knn, PointsOnALine) {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 5;
  const Eigen::Vector3d y(10, 20, 30);
  Eigen::MatrixXd q(1, 1);
  q << 0.6;
  EXPECT_DOUBLE_EQ(fit_knn(X, y, 2).predict(q)(0), 15.0);
}

TEST(Knn, TiesGoToLowerTrainingRow) {
  Eigen::MatrixXd X(3, 1);
  X << 1, -1, 1;
  const Eigen::Vector3d y(1, 2, 3);
  Eigen::MatrixXd q(1, 1);
  q << 0;
  const KnnModel m = fit_knn(X, y, 2);
  EXPECT_EQ(m.neighbors(q.row(0)), (std::vector<Eigen::Index>{0, 1}));
  EXPECT_DOUBLE_EQ(m.predict(q)(0), 1.5);
}

TEST(Knn, InverseDistanceWeighting) {
  Eigen::MatrixXd X(2, 1);
  X << 0, 3;
  const Eigen::Vector2d y(0, 6);
  Eigen::MatrixXd q(2, 1);
  q << 1, 3;
  const Eigen::VectorXd p = fit_knn(X, y, 2, KnnWeighting::inverse_distance).predict(q);
  EXPECT_DOUBLE_EQ(p(0), (1.0 * 0 + 0.5 * 6) / 1.5);
  EXPECT_DOUBLE_EQ(p(1), 6.0);
}

TEST(Knn, KAboveRowCountIsAnError) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  EXPECT_THROW(fit_knn(X, Eigen::VectorXd::Zero(3), 4), Error);
}

TEST(Knn, ZeroTrainingErrorForDistinctRows) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd X = uniform_matrix(rng, 40, 4);
    const Eigen::VectorXd y = uniform_matrix(rng, 40, 1);
    EXPECT_EQ(fit_knn(X, y, 1).predict(X), y);
  }
}

TEST(Tree, DepthZeroPredictsMean) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd X = uniform_matrix(rng, 25, 3);
  const Eigen::VectorXd y = uniform_matrix(rng, 25, 1);
  const RegressionTree t = fit_tree(X, y, {.max_depth = 0});
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_NEAR(t.predict(uniform_matrix(rng, 1, 3))(0), y.mean(), 1e-14);
}

TEST(Tree, SeparableStepDataAtDepthOne) {
  Eigen::MatrixXd X(6, 2);
  X << 0.3, 1, 0.1, 2, 0.2, 3, 0.8, 4, 0.9, 5, 0.7, 6;
  Eigen::VectorXd y(6);
  y << 2, 2, 2, 7, 7, 7;
  const RegressionTree t = fit_tree(X, y, {.max_depth = 1});
  ASSERT_EQ(t.depth(), 1);
  EXPECT_EQ(t.nodes[0].feature, 0);  // feature 1 splits equally well; lowest index wins
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5);
  EXPECT_EQ(t.predict(X), y);
}

TEST(Tree, DepthOneMatchesExhaustiveSplitSearch) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::MatrixXd X = uniform_matrix(rng, 30, 3);
    const Eigen::VectorXd y = uniform_matrix(rng, 30, 1);
    const RegressionTree t = fit_tree(X, y, {.max_depth = 1});
    const double sse = (t.predict(X) - y).squaredNorm();
    EXPECT_NEAR(sse, best_split_sse(X, y), 1e-10);
  }
}

TEST(Tree, ConstantTargetIsSingleLeaf) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd X = uniform_matrix(rng, 12, 2);
  const RegressionTree t = fit_tree(X, Eigen::VectorXd::Constant(12, 3.5), {.max_depth = 5});
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.predict(X), Eigen::VectorXd::Constant(12, 3.5));
}

TEST(Tree, ConstantFeaturesGiveSingleLeaf) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(8, 3);
  Eigen::VectorXd y(8);
  y << 1, 2, 3, 4, 5, 6, 7, 8;
  EXPECT_EQ(fit_tree(X, y, {.max_depth = 4}).nodes.size(), 1u);
}

TEST(Tree, RespectsDepthAndMinLeaf) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd X = uniform_matrix(rng, 200, 4);
  const Eigen::VectorXd y = uniform_matrix(rng, 200, 1);
  const RegressionTree t = fit_tree(X, y, {.max_depth = 4, .min_leaf = 10});
  EXPECT_LE(t.depth(), 4);
  // Every leaf holds at least min_leaf training rows.
  std::vector<int> count(t.nodes.size());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    int i = 0;
    while (t.nodes[i].feature >= 0) i = X(r, t.nodes[i].feature) <= t.nodes[i].threshold ? t.nodes[i].left : t.nodes[i].right;
    ++count[i];
  }
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    if (t.nodes[i].feature >= 0) continue;
    EXPECT_GE(count[i], 10);
  }
}

TEST(Tree, DeepTreeFitsDistinctRowsExactly) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd X = uniform_matrix(rng, 50, 2);
  const Eigen::VectorXd y = uniform_matrix(rng, 50, 1);
  EXPECT_LE((fit_tree(X, y, {.max_depth = 50}).predict(X) - y).cwiseAbs().maxCoeff(), 1e-12);
}
