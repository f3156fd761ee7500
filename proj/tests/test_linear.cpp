#include <gtest/gtest.h>

#include <random>

#include "btof/models/model.hpp"

using namespace btof;
using namespace btof::models;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Columns with mean 0 and unit mean square.
Eigen::MatrixXd standardized(Eigen::MatrixXd X) {
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    X.col(j).array() -= X.col(j).mean();
    X.col(j) /= std::sqrt(X.col(j).squaredNorm() / n);
  }
  return X;
}

}  // namespace

TEST(Ridge, IdentityDesignClosedForm) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd y = Eigen::Vector2d(1, 2);
  const LinearModel m = fit_ridge(X, y, 1.0, false);
  EXPECT_NEAR(m.coef(0), 0.5, 1e-15);
  EXPECT_NEAR(m.coef(1), 1.0, 1e-15);
  EXPECT_EQ(m.intercept, 0.0);
}

TEST(Ridge, InterpolatesSquareSystemAtZeroPenalty) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd X = gaussian(rng, 6, 6) + 3.0 * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::VectorXd y = gaussian(rng, 6, 1);
    const LinearModel m = fit_ridge(X, y, 0.0, false);
    EXPECT_LE((m.predict(X) - y).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Ridge, LargePenaltyShrinksToZero) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = gaussian(rng, 40, 5);
  const Eigen::VectorXd y = gaussian(rng, 40, 1);
  const LinearModel m = fit_ridge(X, y, 1e9);
  EXPECT_LE(m.coef.norm(), 1e-6 * (X.transpose() * y).norm());
  EXPECT_NEAR(m.intercept, y.mean(), 1e-6);
}

TEST(Ridge, NormalEquationResidual) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng() % 50), d = 1 + static_cast<Eigen::Index>(rng() % 8);
    const Eigen::MatrixXd X = gaussian(rng, n, d);
    const Eigen::VectorXd y = gaussian(rng, n, 1);
    const double lambda = std::pow(10.0, static_cast<double>(rng() % 5) - 2.0);
    const LinearModel m = fit_ridge(X, y, lambda, false);
    const Eigen::VectorXd Xty = X.transpose() * y;
    const Eigen::VectorXd r = (X.transpose() * X + lambda * Eigen::MatrixXd::Identity(d, d)) * m.coef - Xty;
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-8 * (1.0 + Xty.cwiseAbs().maxCoeff()));
  }
}

TEST(Ridge, InterceptIsUnpenalized) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd X = gaussian(rng, 30, 3);
  const Eigen::VectorXd y = (X * Eigen::Vector3d(1, -2, 0.5)).array() + 100.0;
  const LinearModel m = fit_ridge(X, y, 0.0);
  EXPECT_NEAR(m.intercept, 100.0, 1e-9);
  EXPECT_NEAR(m.coef(1), -2.0, 1e-9);
}

TEST(Ridge, SingularSystemAdvisesPositivePenalty) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 2, 2, 4, 3, 6;
  const Eigen::Vector3d y(1, 2, 3);
  try {
    fit_ridge(X, y, 0.0, false);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lambda > 0"), std::string::npos);
  }
  EXPECT_NO_THROW(fit_ridge(X, y, 0.1, false));
}

TEST(Lasso, UnivariateSoftThreshold) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd x = standardized(gaussian(rng, 50, 1));
    Eigen::VectorXd y = 0.8 * x.col(0) + 0.5 * gaussian(rng, 50, 1);
    y.array() -= y.mean();
    const double c = x.col(0).dot(y) / 50.0;  // OLS slope on a unit-mean-square column
    for (double lambda : {0.0, 0.1, 0.5, 2.0}) {
      const LinearModel m = fit_lasso(x, y, {.lambda = lambda, .tol = 1e-12});
      const double expected = (c > 0 ? 1.0 : -1.0) * std::max(std::abs(c) - lambda, 0.0);
      EXPECT_NEAR(m.coef(0), expected, 1e-8);
      EXPECT_TRUE(m.converged);
    }
  }
}

TEST(Lasso, ZeroPenaltyMatchesRidgeAtZero) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd X = gaussian(rng, 80, 4);
  const Eigen::VectorXd y = (X * Eigen::Vector4d(1, 0, -3, 2)).array() + 0.3 * gaussian(rng, 80, 1).array() + 5.0;
  const LinearModel ls = fit_lasso(X, y, {.lambda = 0.0, .tol = 1e-13, .max_iter = 100000});
  const LinearModel ols = fit_ridge(X, y, 0.0);
  EXPECT_LE((ls.coef - ols.coef).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(ls.intercept, ols.intercept, 1e-6);
}

TEST(Lasso, FullShrinkageThreshold) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd X = standardized(gaussian(rng, 60, 5));
  Eigen::VectorXd y = gaussian(rng, 60, 1);
  y.array() -= y.mean();
  const double lmax = (X.transpose() * y).cwiseAbs().maxCoeff() / 60.0;
  EXPECT_TRUE(fit_lasso(X, y, {.lambda = lmax}).coef.isZero(0.0));
  EXPECT_FALSE(fit_lasso(X, y, {.lambda = 0.9 * lmax}).coef.isZero(0.0));
}

TEST(Lasso, KktConditionsOnStandardizedProblems) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd X = standardized(gaussian(rng, 100, 8));
    Eigen::VectorXd y = X * gaussian(rng, 8, 1) + gaussian(rng, 100, 1);
    y.array() -= y.mean();
    const double lambda = 0.05 * static_cast<double>(1 + rep % 5);
    const LinearModel m = fit_lasso(X, y, {.lambda = lambda, .tol = 1e-12, .max_iter = 100000});
    ASSERT_TRUE(m.converged);
    EXPECT_LE(m.kkt_residual, 1e-6);
    const Eigen::VectorXd r = y - m.predict(X);
    for (Eigen::Index j = 0; j < 8; ++j) {
      const double g = X.col(j).dot(r) / 100.0;
      if (m.coef(j) != 0.0)
        EXPECT_LE(std::abs(g - lambda * (m.coef(j) > 0 ? 1.0 : -1.0)), 1e-6);
      else
        EXPECT_LE(std::abs(g), lambda + 1e-6);
    }
  }
}

TEST(Lasso, NonConvergenceIsFlagged) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd X = gaussian(rng, 50, 6);
  const Eigen::VectorXd y = gaussian(rng, 50, 1);
  const LinearModel m = fit_lasso(X, y, {.lambda = 1e-4, .tol = 1e-15, .max_iter = 1});
  EXPECT_FALSE(m.converged);
  EXPECT_EQ(m.iterations, 1);
}

TEST(Lasso, ConstantColumnGetsZero) {
  std::mt19937_64 rng(10);
  Eigen::MatrixXd X = gaussian(rng, 30, 2);
  X.col(1).setConstant(4.0);
  const LinearModel m = fit_lasso(X, X.col(0) * 2.0, {.lambda = 0.01});
  EXPECT_EQ(m.coef(1), 0.0);
}
