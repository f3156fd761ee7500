#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "btof/error.hpp"

namespace btof::models {

// y ~ X * coef + intercept. Shared by ridge and lasso.
struct LinearModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  // Lasso diagnostics; ridge leaves the defaults.
  bool converged = true;
  int iterations = 0;
  double kkt_residual = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    return (X * coef).array() + intercept;
  }
};

// Solves (A'A + lambda*D) beta = A'y with A = [X 1] and D = diag(1,...,1,0):
// the appended intercept column is not penalized. Without an intercept this is
// plain (X'X + lambda*I) beta = X'y.
inline LinearModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                             bool fit_intercept = true) {
  if (X.rows() < 1) throw Error("ridge: need at least one row");
  if (X.rows() != y.size()) throw Error("ridge: X and y row counts differ");
  if (!(lambda >= 0.0)) throw Error("ridge: lambda must be >= 0");
  const Eigen::Index d = X.cols();
  const Eigen::Index p = d + (fit_intercept ? 1 : 0);
  Eigen::MatrixXd G(p, p);
  Eigen::VectorXd rhs(p);
  G.topLeftCorner(d, d).noalias() = X.transpose() * X;
  rhs.head(d).noalias() = X.transpose() * y;
  if (fit_intercept) {
    const Eigen::VectorXd colsum = X.colwise().sum().transpose();
    G.topRightCorner(d, 1) = colsum;
    G.bottomLeftCorner(1, d) = colsum.transpose();
    G(d, d) = static_cast<double>(X.rows());
    rhs(d) = y.sum();
  }
  G.topLeftCorner(d, d).diagonal().array() += lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
    throw Error("ridge: normal equations are singular at lambda=" + std::to_string(lambda) +
                "; use lambda > 0");
  const Eigen::VectorXd beta = llt.solve(rhs);
  LinearModel m;
  m.coef = beta.head(d);
  m.intercept = fit_intercept ? beta(d) : 0.0;
  return m;
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

struct LassoOptions {
  double lambda = 0.1;
  double tol = 1e-9;
  int max_iter = 10000;
  bool fit_intercept = true;
};

// Cyclic coordinate descent for
//   (1/2n) ||y - b - Z beta||^2 + lambda ||beta||_1
// where Z holds the columns of X centered (when fitting an intercept) and
// scaled to unit mean square. Coefficients are mapped back to the original
// columns on return. Constant columns get a zero coefficient.
inline LinearModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoOptions& opt) {
  if (X.rows() < 1) throw Error("lasso: need at least one row");
  if (X.rows() != y.size()) throw Error("lasso: X and y row counts differ");
  if (!(opt.lambda >= 0.0)) throw Error("lasso: lambda must be >= 0");
  if (!(opt.tol > 0.0)) throw Error("lasso: tol must be > 0");
  const Eigen::Index n = X.rows(), d = X.cols();
  const double nd = static_cast<double>(n);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  if (opt.fit_intercept) mean = X.colwise().mean().transpose();
  Eigen::MatrixXd Z = X.rowwise() - mean.transpose();
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double s = std::sqrt(Z.col(j).squaredNorm() / nd);
    scale(j) = s;
    if (s > 0.0) Z.col(j) /= s;
  }
  const double y_mean = opt.fit_intercept ? y.mean() : 0.0;
  Eigen::VectorXd r = y.array() - y_mean;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd curvature(d);  // z_j'z_j / n, 1 when centered
  for (Eigen::Index j = 0; j < d; ++j) curvature(j) = scale(j) > 0.0 ? Z.col(j).squaredNorm() / nd : 0.0;

  // A few ulps of slack so that lambda at the full-shrinkage threshold,
  // computed by the caller with different rounding, still zeros everything.
  const double gamma = opt.lambda * (1.0 + 64.0 * std::numeric_limits<double>::epsilon());
  LinearModel m;
  m.converged = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (curvature(j) == 0.0) continue;
      const double old = beta(j);
      const double z = Z.col(j).dot(r) / nd + curvature(j) * old;
      const double next = soft_threshold(z, gamma) / curvature(j);
      if (next != old) {
        r -= (next - old) * Z.col(j);
        beta(j) = next;
        max_delta = std::max(max_delta, std::abs(next - old));
      }
    }
    m.iterations = it;
    if (max_delta < opt.tol) {
      m.converged = true;
      break;
    }
  }

  // Stationarity on the standardized problem.
  double kkt = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (curvature(j) == 0.0) continue;
    const double g = Z.col(j).dot(r) / nd;
    const double v = beta(j) != 0.0 ? std::abs(g - opt.lambda * (beta(j) > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(g) - opt.lambda);
    kkt = std::max(kkt, v);
  }
  m.kkt_residual = kkt;

  m.coef = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j)
    if (scale(j) > 0.0) m.coef(j) = beta(j) / scale(j);
  m.intercept = opt.fit_intercept ? y_mean - m.coef.dot(mean) : 0.0;
  return m;
}

}  // namespace btof::models
