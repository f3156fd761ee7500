#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "btof/error.hpp"
#include "btof/rng.hpp"

namespace btof::models {

enum class Activation { relu, identity };

// Dense feed-forward network with one linear output unit. Layer l maps
// a_{l-1} to act(W_l a_{l-1} + b_l); the output layer has no activation.
struct MlpNetwork {
  Activation activation = Activation::relu;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;
  std::vector<bool> has_bias;

  static MlpNetwork init(int inputs, const std::vector<int>& hidden, Activation act, bool hidden_bias, Rng& rng) {
    MlpNetwork net;
    net.activation = act;
    std::vector<int> sizes{inputs};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    const double gain = act == Activation::relu ? 6.0 : 3.0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l], out = sizes[l + 1];
      const double a = std::sqrt(gain / std::max(1, in));
      Eigen::MatrixXd W(out, in);
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = a * (2.0 * uniform01(rng) - 1.0);
      net.weights.push_back(std::move(W));
      net.biases.push_back(Eigen::VectorXd::Zero(out));
      net.has_bias.push_back(l + 2 == sizes.size() || hidden_bias);
    }
    return net;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size()) + (has_bias[l] ? static_cast<std::size_t>(biases[l].size()) : 0);
    return n;
  }

  // Flattened as W_0 (column-major), b_0, W_1, b_1, ... skipping absent biases.
  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      v.segment(k, weights[l].size()) = weights[l].reshaped();
      k += weights[l].size();
      if (has_bias[l]) {
        v.segment(k, biases[l].size()) = biases[l];
        k += biases[l].size();
      }
    }
    return v;
  }

  void set_flat(const Eigen::VectorXd& v) {
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l].reshaped() = v.segment(k, weights[l].size());
      k += weights[l].size();
      if (has_bias[l]) {
        biases[l] = v.segment(k, biases[l].size());
        k += biases[l].size();
      }
    }
  }

  Eigen::VectorXd forward(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Eigen::MatrixXd z = a * weights[l].transpose();
      z.rowwise() += biases[l].transpose();
      if (l + 1 < weights.size() && activation == Activation::relu) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a.col(0);
  }

  // Mean half squared error 1/(2m) sum (f(x) - y)^2.
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    return 0.5 * (forward(X) - y).squaredNorm() / static_cast<double>(X.rows());
  }

  // Backpropagated gradient of loss(), flattened like flat(). Returns the loss.
  double gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::VectorXd& grad) const {
    const std::size_t L = weights.size();
    std::vector<Eigen::MatrixXd> act(L + 1);  // act[0] = X, act[l+1] = output of layer l
    act[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
      Eigen::MatrixXd z = act[l] * weights[l].transpose();
      z.rowwise() += biases[l].transpose();
      if (l + 1 < L && activation == Activation::relu) z = z.cwiseMax(0.0);
      act[l + 1] = std::move(z);
    }
    const double m = static_cast<double>(X.rows());
    const Eigen::VectorXd err = act[L].col(0) - y;
    const double value = 0.5 * err.squaredNorm() / m;

    grad.resize(static_cast<Eigen::Index>(parameter_count()));
    std::vector<Eigen::MatrixXd> dW(L);
    std::vector<Eigen::VectorXd> db(L);
    Eigen::MatrixXd delta = err / m;  // m x 1
    for (std::size_t l = L; l-- > 0;) {
      dW[l] = delta.transpose() * act[l];
      db[l] = delta.colwise().sum().transpose();
      if (l == 0) break;
      Eigen::MatrixXd back = delta * weights[l];
      if (activation == Activation::relu) back = back.cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
      delta = std::move(back);
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < L; ++l) {
      grad.segment(k, dW[l].size()) = dW[l].reshaped();
      k += dW[l].size();
      if (has_bias[l]) {
        grad.segment(k, db[l].size()) = db[l];
        k += db[l].size();
      }
    }
    return value;
  }
};

struct MlpParams {
  std::vector<int> hidden{80, 20};
  Activation activation = Activation::relu;
  bool hidden_bias = true;
  int epochs = 50;
  int batch_size = 32;
  double step_size = 0.01;
  double momentum = 0.9;
};

// Network plus the input/target standardization it was trained under.
struct MlpModel {
  MlpNetwork net;
  Eigen::VectorXd x_mean, x_scale;
  double y_mean = 0.0, y_scale = 1.0;
  double final_loss = 0.0;  // on the standardized training data

  Eigen::MatrixXd standardize(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Z = X.rowwise() - x_mean.transpose();
    return Z.array().rowwise() / x_scale.transpose().array();
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    return (net.forward(standardize(X)).array() * y_scale + y_mean).matrix();
  }
};

// Mini-batch gradient descent with classical momentum on the half squared
// loss. Inputs and target are standardized internally.
inline MlpModel fit_mlp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const MlpParams& params,
                        std::uint64_t seed) {
  if (X.rows() == 0) throw Error("mlp: no training rows");
  if (params.epochs < 1 || params.batch_size < 1) throw Error("mlp: epochs and batch_size must be >= 1");
  if (!(params.step_size > 0.0)) throw Error("mlp: step_size must be > 0");
  if (!(params.momentum >= 0.0 && params.momentum < 1.0)) throw Error("mlp: momentum must lie in [0, 1)");
  for (int h : params.hidden)
    if (h < 1) throw Error("mlp: hidden layer sizes must be >= 1");

  const Eigen::Index n = X.rows();
  MlpModel model;
  model.x_mean = X.colwise().mean().transpose();
  model.x_scale = ((X.rowwise() - model.x_mean.transpose()).colwise().squaredNorm() / static_cast<double>(n))
                      .cwiseSqrt()
                      .transpose();
  for (Eigen::Index j = 0; j < model.x_scale.size(); ++j)
    if (!(model.x_scale(j) > 0.0)) model.x_scale(j) = 1.0;
  model.y_mean = y.mean();
  model.y_scale = std::sqrt((y.array() - model.y_mean).square().mean());
  if (!(model.y_scale > 0.0)) model.y_scale = 1.0;

  const Eigen::MatrixXd Z = model.standardize(X);
  const Eigen::VectorXd t = (y.array() - model.y_mean) / model.y_scale;

  Rng rng(seed);
  model.net = MlpNetwork::init(static_cast<int>(X.cols()), params.hidden, params.activation, params.hidden_bias, rng);
  Eigen::VectorXd w = model.net.flat();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd grad;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index batch = std::min<Eigen::Index>(params.batch_size, n);
  Eigen::MatrixXd Xb;
  Eigen::VectorXd yb;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index m = std::min(batch, n - start);
      Xb.resize(m, Z.cols());
      yb.resize(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        Xb.row(r) = Z.row(order[static_cast<std::size_t>(start + r)]);
        yb(r) = t(order[static_cast<std::size_t>(start + r)]);
      }
      const double l = model.net.gradient(Xb, yb, grad);
      if (!std::isfinite(l) || !grad.allFinite())
        throw Error("mlp: training diverged at epoch " + std::to_string(epoch + 1) + "; use a smaller step_size");
      velocity = params.momentum * velocity - params.step_size * grad;
      w += velocity;
      model.net.set_flat(w);
    }
  }
  model.final_loss = model.net.loss(Z, t);
  if (!std::isfinite(model.final_loss)) throw Error("mlp: training diverged; use a smaller step_size");
  return model;
}

}  // namespace btof::models
