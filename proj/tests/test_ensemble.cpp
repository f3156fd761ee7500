#include <gtest/gtest.h>

#include <random>

#include "btof/models/model.hpp"
#include "btof/pipeline.hpp"
#include "btof/synth.hpp"

using namespace btof;
using namespace btof::models;

namespace {

Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Eigen::VectorXd nonlinear_target(const Eigen::MatrixXd& X, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 0.1);
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) y(r) = std::sin(3 * X(r, 0)) + X(r, 1) * X(r, 2) + g(rng);
  return y;
}

std::vector<std::uint64_t> iota_keys(std::size_t n) {
  std::vector<std::uint64_t> k(n);
  std::iota(k.begin(), k.end(), std::uint64_t{1000});
  return k;
}

}  // namespace

TEST(Forest, SingleUnbaggedTreeEqualsPlainTree) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = uniform_matrix(rng, 80, 4);
  const Eigen::VectorXd y = nonlinear_target(X, rng);
  const TreeParams tp{.max_depth = 4, .min_leaf = 2, .feature_frac = 1.0};
  const ForestModel f = fit_random_forest(X, y, {.n_estimators = 1, .tree = tp, .bootstrap = false}, 42);
  const RegressionTree t = fit_tree(X, y, {.max_depth = 4, .min_leaf = 2});
  const Eigen::MatrixXd Q = uniform_matrix(rng, 50, 4);
  EXPECT_EQ(f.predict(Q), t.predict(Q));
}

TEST(Forest, SameSeedIsBitwiseIdentical) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = uniform_matrix(rng, 120, 5);
  const Eigen::VectorXd y = nonlinear_target(X, rng);
  const ForestParams p{.n_estimators = 20};
  const Eigen::MatrixXd Q = uniform_matrix(rng, 30, 5);
  const Eigen::VectorXd a = fit_random_forest(X, y, p, 9).predict(Q);
  EXPECT_EQ(a, fit_random_forest(X, y, p, 9).predict(Q));
  EXPECT_EQ(a, fit_random_forest(X, y, p, 9, {}, 4).predict(Q));  // threads
  EXPECT_NE(a, fit_random_forest(X, y, p, 10).predict(Q));
}

TEST(Forest, BeatsMeanPredictorOnSyntheticHoldout) {
  SynthConfig sc;
  sc.n_items = 60;
  sc.seed = 3;
  const DemandCube cube = generate(sc);
  const FrontierLayout layout = FrontierLayout::make(4, 1);
  const SplitResult s =
      split_dev_holdout(frontiers_for_all(cube, layout), 4, cube.first_period(), cube.last_period(), 37, 8);
  const Dataset dev = pool_frontiers(s.dev, layout), hold = pool_frontiers(s.holdout, layout);
  const Eigen::VectorXd y = dev.Y.col(0);
  const ForestModel f = fit_random_forest(dev.X, y, {.n_estimators = 30}, 11);
  const Eigen::VectorXd truth = hold.Y.col(0);
  const double mse_forest = (f.predict(hold.X) - truth).squaredNorm();
  const double mse_mean = (truth.array() - y.mean()).square().sum();
  EXPECT_LE(mse_forest, mse_mean);
}

TEST(Forest, InvariantToRowOrderGivenKeys) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd X = uniform_matrix(rng, 90, 3);
  const Eigen::VectorXd y = nonlinear_target(X, rng);
  const auto keys = iota_keys(90);
  std::vector<std::size_t> perm(90);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd Xp(90, 3);
  Eigen::VectorXd yp(90);
  std::vector<std::uint64_t> kp(90);
  for (std::size_t i = 0; i < 90; ++i) {
    Xp.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(perm[i]));
    yp(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(perm[i]));
    kp[i] = keys[perm[i]];
  }
  const Eigen::MatrixXd Q = uniform_matrix(rng, 40, 3);
  const ForestParams fp{.n_estimators = 10};
  EXPECT_EQ(fit_random_forest(X, y, fp, 5, keys).predict(Q), fit_random_forest(Xp, yp, fp, 5, kp).predict(Q));
  const GbtParams gp{.n_estimators = 30, .subsample = 0.7};
  EXPECT_EQ(fit_gbt(X, y, gp, 5, keys).predict(Q), fit_gbt(Xp, yp, gp, 5, kp).predict(Q));
}

TEST(Forest, DuplicateKeysAreRejected) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 1);
  const std::vector<std::uint64_t> keys{3, 3};
  EXPECT_THROW(fit_random_forest(X, Eigen::VectorXd::Zero(2), {}, 0, keys), Error);
}

TEST(Gbt, SinglePointFixpoint) {
  Eigen::MatrixXd X(1, 2);
  X << 0.3, -0.2;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 4.25);
  for (double nu : {0.05, 0.5, 1.0}) {
    const GbtModel m = fit_gbt(X, y, {.n_estimators = 50, .learning_rate = nu}, 1);
    EXPECT_EQ(m.predict(X)(0), 4.25);
  }
}

TEST(Gbt, FullLearningRateIsolatesAllPoints) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd X = uniform_matrix(rng, 40, 3);
  const Eigen::VectorXd y = nonlinear_target(X, rng);
  const GbtModel m = fit_gbt(X, y, {.n_estimators = 1, .learning_rate = 1.0, .tree = {.max_depth = 40}}, 1);
  EXPECT_LE((m.predict(X) - y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(m.train_loss.back(), 1e-24);
}

TEST(Gbt, TrainingLossNonIncreasing) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd X = uniform_matrix(rng, 150, 4);
  const Eigen::VectorXd y = nonlinear_target(X, rng);
  const GbtModel m = fit_gbt(X, y, {.n_estimators = 500, .learning_rate = 0.1}, 2);
  ASSERT_EQ(m.train_loss.size(), 501u);
  EXPECT_NEAR(m.train_loss.front(), (y.array() - y.mean()).square().mean(), 1e-12);
  for (std::size_t s = 1; s < m.train_loss.size(); ++s) EXPECT_LE(m.train_loss[s], m.train_loss[s - 1] * (1 + 1e-12));
  EXPECT_LT(m.train_loss.back(), 0.2 * m.train_loss.front());
}

TEST(Gbt, PredictionIsInitPlusScaledTrees) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd X = uniform_matrix(rng, 60, 3);
  const Eigen::VectorXd y = nonlinear_target(X, rng);
  const GbtModel m = fit_gbt(X, y, {.n_estimators = 5, .learning_rate = 0.3}, 3);
  EXPECT_DOUBLE_EQ(m.init, y.mean());
  Eigen::VectorXd manual = Eigen::VectorXd::Constant(60, m.init);
  for (const auto& t : m.trees) manual += 0.3 * t.predict(X);
  EXPECT_LE((manual - m.predict(X)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gbt, RejectsLearningRateOutsideUnitInterval) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 1);
  EXPECT_THROW(fit_gbt(X, Eigen::VectorXd::Zero(3), {.learning_rate = 0.0}, 0), Error);
  EXPECT_THROW(fit_gbt(X, Eigen::VectorXd::Zero(3), {.learning_rate = 1.5}, 0), Error);
}
