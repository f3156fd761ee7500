#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "btof/error.hpp"
#include "btof/parallel.hpp"
#include "btof/rng.hpp"
#include "btof/models/ensemble.hpp"
#include "btof/models/knn.hpp"
#include "btof/models/linear.hpp"
#include "btof/models/mlp.hpp"
#include "btof/models/tree.hpp"

namespace btof::models {

enum class Family { ridge, lasso, knn, tree, random_forest, gbt, mlp };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::ridge: return "ridge";
    case Family::lasso: return "lasso";
    case Family::knn: return "knn";
    case Family::tree: return "tree";
    case Family::random_forest: return "random_forest";
    case Family::gbt: return "gbt";
    case Family::mlp: return "mlp";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : {Family::ridge, Family::lasso, Family::knn, Family::tree, Family::random_forest, Family::gbt, Family::mlp})
    if (s == to_string(f)) return f;
  throw Error("unknown model family '" + std::string(s) + "'");
}

inline const char* to_string(KnnWeighting w) { return w == KnnWeighting::uniform ? "uniform" : "inverse_distance"; }
inline KnnWeighting parse_weighting(std::string_view s) {
  if (s == "uniform") return KnnWeighting::uniform;
  if (s == "inverse_distance") return KnnWeighting::inverse_distance;
  throw Error("unknown knn weighting '" + std::string(s) + "'");
}
inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw Error("unknown activation '" + std::string(s) + "'");
}

// Declarative hyperparameters for one regressor. Only the fields of `family`
// are read.
struct ModelSpec {
  Family family = Family::ridge;
  double lambda = 1.0;  // ridge, lasso
  double tol = 1e-9;    // lasso
  int max_iter = 10000;
  int k = 5;  // knn
  KnnWeighting weighting = KnnWeighting::uniform;
  int max_depth = 3;  // tree, forest, gbt
  int min_leaf = 1;
  int n_estimators = 100;  // forest, gbt
  double feature_frac = 1.0;
  bool bootstrap = true;
  double learning_rate = 0.1;  // gbt
  double subsample = 1.0;
  std::vector<int> hidden{80, 20};  // mlp
  Activation activation = Activation::relu;
  int epochs = 50;
  int batch_size = 32;
  double step_size = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    switch (family) {
      case Family::ridge:
      case Family::lasso:
        if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
        if (family == Family::lasso && !(tol > 0.0)) throw Error("tol must be > 0");
        break;
      case Family::knn:
        if (k < 1) throw Error("k must be >= 1");
        break;
      case Family::gbt:
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw Error("learning_rate must lie in (0, 1]");
        [[fallthrough]];
      case Family::random_forest:
        if (n_estimators < 1) throw Error("n_estimators must be >= 1");
        [[fallthrough]];
      case Family::tree:
        if (max_depth < 0) throw Error("max_depth must be >= 0");
        if (min_leaf < 1) throw Error("min_leaf must be >= 1");
        if (!(feature_frac > 0.0 && feature_frac <= 1.0)) throw Error("feature_frac must lie in (0, 1]");
        break;
      case Family::mlp:
        if (epochs < 1 || batch_size < 1) throw Error("epochs and batch_size must be >= 1");
        if (!(step_size > 0.0)) throw Error("step_size must be > 0");
        break;
    }
  }

  // Hyperparameters relevant to the family, as a JSON object.
  nlohmann::ordered_json hyperparameters() const {
    nlohmann::ordered_json j;
    switch (family) {
      case Family::ridge: j["lambda"] = lambda; break;
      case Family::lasso:
        j["lambda"] = lambda;
        j["tol"] = tol;
        j["max_iter"] = max_iter;
        break;
      case Family::knn:
        j["k"] = k;
        j["weighting"] = to_string(weighting);
        break;
      case Family::tree:
        j["max_depth"] = max_depth;
        j["min_leaf"] = min_leaf;
        break;
      case Family::random_forest:
        j["n_estimators"] = n_estimators;
        j["max_depth"] = max_depth;
        j["min_leaf"] = min_leaf;
        j["feature_frac"] = feature_frac;
        j["bootstrap"] = bootstrap;
        break;
      case Family::gbt:
        j["n_estimators"] = n_estimators;
        j["learning_rate"] = learning_rate;
        j["max_depth"] = max_depth;
        j["min_leaf"] = min_leaf;
        j["feature_frac"] = feature_frac;
        j["subsample"] = subsample;
        break;
      case Family::mlp:
        j["hidden"] = hidden;
        j["activation"] = to_string(activation);
        j["epochs"] = epochs;
        j["batch_size"] = batch_size;
        j["step_size"] = step_size;
        j["momentum"] = momentum;
        break;
    }
    j["seed"] = seed;
    return j;
  }

  static ModelSpec from_hyperparameters(Family family, const nlohmann::ordered_json& j) {
    ModelSpec s;
    s.family = family;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("lambda", s.lambda);
    get("tol", s.tol);
    get("max_iter", s.max_iter);
    get("k", s.k);
    if (j.contains("weighting")) s.weighting = parse_weighting(j.at("weighting").get<std::string>());
    get("max_depth", s.max_depth);
    get("min_leaf", s.min_leaf);
    get("n_estimators", s.n_estimators);
    get("feature_frac", s.feature_frac);
    get("bootstrap", s.bootstrap);
    get("learning_rate", s.learning_rate);
    get("subsample", s.subsample);
    get("hidden", s.hidden);
    if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
    get("epochs", s.epochs);
    get("batch_size", s.batch_size);
    get("step_size", s.step_size);
    get("momentum", s.momentum);
    get("seed", s.seed);
    return s;
  }

  // e.g. "gbt(n_estimators=500,learning_rate=0.1,...)"; seed omitted.
  std::string describe() const {
    std::ostringstream os;
    os << to_string(family) << '(';
    bool first = true;
    const auto hp = hyperparameters();
    for (const auto& [key, value] : hp.items()) {
      if (key == "seed") continue;
      os << (first ? "" : ",") << key << '=' << (value.is_string() ? value.get<std::string>() : value.dump());
      first = false;
    }
    os << ')';
    return os.str();
  }
};

using Parameters = std::variant<LinearModel, KnnModel, RegressionTree, ForestModel, GbtModel, MlpModel>;

// One trained single-target regressor.
struct FittedModel {
  ModelSpec spec;
  Eigen::Index input_dim = 0;
  Parameters params;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != input_dim)
      throw Error("predict: input has " + std::to_string(X.cols()) + " columns, model expects " +
                  std::to_string(input_dim));
    if (X.rows() == 0) return Eigen::VectorXd(0);
    return std::visit([&](const auto& p) -> Eigen::VectorXd { return p.predict(X); }, params);
  }
};

// `row_keys` (forest/gbt) gives each row a stable identity; see
// fit_random_forest.
inline FittedModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             std::span<const std::uint64_t> row_keys = {}, std::size_t threads = 1) {
  spec.validate();
  if (X.rows() != y.size()) throw Error("fit: X and y row counts differ");
  FittedModel m{spec, X.cols(), LinearModel{}};
  const TreeParams tree{.max_depth = spec.max_depth, .min_leaf = spec.min_leaf, .feature_frac = spec.feature_frac};
  switch (spec.family) {
    case Family::ridge: m.params = fit_ridge(X, y, spec.lambda); break;
    case Family::lasso:
      m.params = fit_lasso(X, y, {.lambda = spec.lambda, .tol = spec.tol, .max_iter = spec.max_iter});
      break;
    case Family::knn: m.params = fit_knn(X, y, spec.k, spec.weighting); break;
    case Family::tree: m.params = fit_tree(X, y, {.max_depth = spec.max_depth, .min_leaf = spec.min_leaf}); break;
    case Family::random_forest:
      m.params = fit_random_forest(X, y, {.n_estimators = spec.n_estimators, .tree = tree, .bootstrap = spec.bootstrap},
                                   spec.seed, row_keys, threads);
      break;
    case Family::gbt:
      m.params = fit_gbt(X, y,
                         {.n_estimators = spec.n_estimators,
                          .learning_rate = spec.learning_rate,
                          .tree = tree,
                          .subsample = spec.subsample},
                         spec.seed, row_keys);
      break;
    case Family::mlp:
      m.params = fit_mlp(X, y,
                         {.hidden = spec.hidden,
                          .activation = spec.activation,
                          .epochs = spec.epochs,
                          .batch_size = spec.batch_size,
                          .step_size = spec.step_size,
                          .momentum = spec.momentum},
                         spec.seed);
      break;
  }
  return m;
}

// One independent model per target column. Target j trains with seed
// derive_seed(spec.seed, j).
struct MultiOutputModel {
  std::vector<FittedModel> targets;

  Eigen::Index input_dim() const { return targets.empty() ? 0 : targets.front().input_dim; }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != input_dim())
      throw Error("predict: input has " + std::to_string(X.cols()) + " columns, model expects " +
                  std::to_string(input_dim()));
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(targets.size()));
    for (std::size_t j = 0; j < targets.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = targets[j].predict(X);
    return out;
  }
};

inline MultiOutputModel fit_multi_output(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                         std::span<const std::uint64_t> row_keys = {}, std::size_t threads = 1) {
  MultiOutputModel m;
  m.targets.resize(static_cast<std::size_t>(Y.cols()));
  parallel_for(m.targets.size(), threads, [&](std::size_t j) {
    ModelSpec s = spec;
    s.seed = derive_seed(spec.seed, j);
    m.targets[j] = fit_model(s, X, Y.col(static_cast<Eigen::Index>(j)), row_keys);
  });
  return m;
}

// ---- JSON persistence -----------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
inline Eigen::VectorXd json_vec(const nlohmann::ordered_json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline nlohmann::ordered_json mat_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}
inline Eigen::MatrixXd json_mat(const nlohmann::ordered_json& j) {
  const auto data = j.at("data").get<std::vector<double>>();
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("model file: matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

inline nlohmann::ordered_json tree_json(const RegressionTree& t) {
  std::vector<int> feature, left, right;
  std::vector<double> threshold, value;
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    left.push_back(n.left);
    right.push_back(n.right);
    threshold.push_back(n.threshold);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}
inline RegressionTree json_tree(const nlohmann::ordered_json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (left.size() != n || right.size() != n || threshold.size() != n || value.size() != n || n == 0)
    throw Error("model file: inconsistent tree arrays");
  RegressionTree t;
  for (std::size_t i = 0; i < n; ++i) {
    if (feature[i] >= 0 && (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                            left[i] >= static_cast<int>(n) || right[i] >= static_cast<int>(n)))
      throw Error("model file: tree child index out of range");
    t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
  }
  return t;
}

struct ParamsToJson {
  nlohmann::ordered_json operator()(const LinearModel& m) const {
    return {{"coef", vec_json(m.coef)}, {"intercept", m.intercept}, {"converged", m.converged},
            {"iterations", m.iterations}, {"kkt_residual", m.kkt_residual}};
  }
  nlohmann::ordered_json operator()(const KnnModel& m) const {
    return {{"X", mat_json(m.X)}, {"y", vec_json(m.y)}};
  }
  nlohmann::ordered_json operator()(const RegressionTree& t) const { return {{"tree", tree_json(t)}}; }
  nlohmann::ordered_json operator()(const ForestModel& m) const {
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : m.trees) trees.push_back(tree_json(t));
    return {{"trees", trees}};
  }
  nlohmann::ordered_json operator()(const GbtModel& m) const {
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : m.trees) trees.push_back(tree_json(t));
    return {{"init", m.init}, {"trees", trees}, {"train_loss", m.train_loss}};
  }
  nlohmann::ordered_json operator()(const MlpModel& m) const {
    auto layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < m.net.weights.size(); ++l)
      layers.push_back({{"weights", mat_json(m.net.weights[l])}, {"bias", vec_json(m.net.biases[l])},
                        {"has_bias", static_cast<bool>(m.net.has_bias[l])}});
    return {{"layers", layers}, {"x_mean", vec_json(m.x_mean)}, {"x_scale", vec_json(m.x_scale)},
            {"y_mean", m.y_mean}, {"y_scale", m.y_scale}, {"final_loss", m.final_loss}};
  }
};

}  // namespace detail

inline nlohmann::ordered_json to_json(const FittedModel& m) {
  nlohmann::ordered_json j;
  j["family"] = to_string(m.spec.family);
  j["hyperparameters"] = m.spec.hyperparameters();
  j["input_dim"] = m.input_dim;
  j["parameters"] = std::visit(detail::ParamsToJson{}, m.params);
  return j;
}

inline FittedModel fitted_from_json(const nlohmann::ordered_json& j) {
  using namespace detail;
  FittedModel m;
  const Family fam = parse_family(j.at("family").get<std::string>());
  m.spec = ModelSpec::from_hyperparameters(fam, j.at("hyperparameters"));
  m.input_dim = j.at("input_dim").get<Eigen::Index>();
  const auto& p = j.at("parameters");
  switch (fam) {
    case Family::ridge:
    case Family::lasso: {
      LinearModel lm;
      lm.coef = json_vec(p.at("coef"));
      lm.intercept = p.at("intercept").get<double>();
      lm.converged = p.value("converged", true);
      lm.iterations = p.value("iterations", 0);
      lm.kkt_residual = p.value("kkt_residual", 0.0);
      if (lm.coef.size() != m.input_dim) throw Error("model file: coefficient count mismatch");
      m.params = lm;
      break;
    }
    case Family::knn: {
      KnnModel km{json_mat(p.at("X")), json_vec(p.at("y")), m.spec.k, m.spec.weighting};
      if (km.X.cols() != m.input_dim || km.X.rows() != km.y.size() || km.k > km.X.rows())
        throw Error("model file: inconsistent knn training set");
      m.params = km;
      break;
    }
    case Family::tree: m.params = json_tree(p.at("tree")); break;
    case Family::random_forest: {
      ForestModel fm;
      for (const auto& t : p.at("trees")) fm.trees.push_back(json_tree(t));
      if (fm.trees.empty()) throw Error("model file: empty forest");
      m.params = fm;
      break;
    }
    case Family::gbt: {
      GbtModel gm;
      gm.init = p.at("init").get<double>();
      gm.learning_rate = m.spec.learning_rate;
      for (const auto& t : p.at("trees")) gm.trees.push_back(json_tree(t));
      gm.train_loss = p.value("train_loss", std::vector<double>{});
      m.params = gm;
      break;
    }
    case Family::mlp: {
      MlpModel mm;
      mm.net.activation = m.spec.activation;
      for (const auto& layer : p.at("layers")) {
        mm.net.weights.push_back(json_mat(layer.at("weights")));
        mm.net.biases.push_back(json_vec(layer.at("bias")));
        mm.net.has_bias.push_back(layer.at("has_bias").get<bool>());
      }
      mm.x_mean = json_vec(p.at("x_mean"));
      mm.x_scale = json_vec(p.at("x_scale"));
      mm.y_mean = p.at("y_mean").get<double>();
      mm.y_scale = p.at("y_scale").get<double>();
      mm.final_loss = p.value("final_loss", 0.0);
      if (mm.net.weights.empty() || mm.net.weights.front().cols() != m.input_dim)
        throw Error("model file: mlp input layer mismatch");
      m.params = mm;
      break;
    }
  }
  return m;
}

inline nlohmann::ordered_json to_json(const MultiOutputModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "btof-model";
  j["version"] = kModelFormatVersion;
  auto targets = nlohmann::ordered_json::array();
  for (const auto& t : m.targets) targets.push_back(to_json(t));
  j["targets"] = targets;
  return j;
}

inline MultiOutputModel multi_output_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", std::string{}) != "btof-model") throw Error("not a btof model document");
  if (j.value("version", 0) != kModelFormatVersion)
    throw Error("unsupported model format version " + std::to_string(j.value("version", 0)));
  MultiOutputModel m;
  for (const auto& t : j.at("targets")) m.targets.push_back(fitted_from_json(t));
  return m;
}

}  // namespace btof::models
