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

std::vector<ModelSpec> one_of_each() {
  std::vector<ModelSpec> specs;
  for (Family f : {Family::ridge, Family::lasso, Family::knn, Family::tree, Family::random_forest, Family::gbt,
                   Family::mlp}) {
    ModelSpec s;
    s.family = f;
    s.lambda = 0.1;
    s.k = 3;
    s.n_estimators = 8;
    s.hidden = {6, 3};
    s.epochs = 3;
    s.seed = 17;
    specs.push_back(s);
  }
  return specs;
}

}  // namespace

TEST(ModelIo, JsonRoundTripPreservesPredictions) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = uniform_matrix(rng, 40, 4);
  const Eigen::MatrixXd Y = uniform_matrix(rng, 40, 3);
  const Eigen::MatrixXd Q = uniform_matrix(rng, 12, 4);
  for (const ModelSpec& spec : one_of_each()) {
    const MultiOutputModel m = fit_multi_output(spec, X, Y);
    const std::string text = to_json(m).dump();
    const MultiOutputModel back = multi_output_from_json(nlohmann::ordered_json::parse(text));
    EXPECT_EQ(back.predict(Q), m.predict(Q)) << spec.describe();
    EXPECT_EQ(to_json(back).dump(), text) << spec.describe();
    EXPECT_EQ(back.targets.front().spec.describe(), spec.describe());
  }
}

TEST(ModelIo, EmptyInputGivesEmptyOutput) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = uniform_matrix(rng, 10, 2);
  const MultiOutputModel m = fit_multi_output(ModelSpec{}, X, uniform_matrix(rng, 10, 3));
  const Eigen::MatrixXd out = m.predict(Eigen::MatrixXd(0, 2));
  EXPECT_EQ(out.rows(), 0);
  EXPECT_EQ(out.cols(), 3);
}

TEST(ModelIo, WrapperOverTenTargets) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd X = uniform_matrix(rng, 30, 14);
  const Eigen::MatrixXd Y = uniform_matrix(rng, 30, 10);
  const MultiOutputModel m = fit_multi_output(ModelSpec{}, X, Y);
  ASSERT_EQ(m.targets.size(), 10u);
  const Eigen::MatrixXd P = m.predict(uniform_matrix(rng, 5, 14));
  EXPECT_EQ(P.rows(), 5);
  EXPECT_EQ(P.cols(), 10);
  // Column j is the independent fit on target j.
  const Eigen::MatrixXd Q = uniform_matrix(rng, 4, 14);
  for (Eigen::Index j = 0; j < 10; ++j)
    EXPECT_LE((m.predict(Q).col(j) - fit_ridge(X, Y.col(j), 1.0).predict(Q)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ModelIo, PerTargetSeedsAreDerived) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd X = uniform_matrix(rng, 30, 3);
  Eigen::MatrixXd Y(30, 2);
  Y.col(0) = X.col(0);
  Y.col(1) = X.col(0);
  ModelSpec s;
  s.family = Family::random_forest;
  s.n_estimators = 5;
  s.seed = 9;
  const MultiOutputModel m = fit_multi_output(s, X, Y, {}, 2);
  EXPECT_EQ(m.targets[0].spec.seed, derive_seed(9, 0));
  EXPECT_EQ(m.targets[1].spec.seed, derive_seed(9, 1));
  EXPECT_EQ(fit_multi_output(s, X, Y, {}, 1).predict(X), m.predict(X));
}

TEST(ModelIo, RidgeEchoesTrainingTargetsOnSquareSystem) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd X = uniform_matrix(rng, 5, 4) + 2.0 * Eigen::MatrixXd::Identity(5, 4);
  const Eigen::MatrixXd Y = uniform_matrix(rng, 5, 2);
  ModelSpec s;
  s.lambda = 0.0;
  // Four features plus the intercept: five unknowns for five rows.
  EXPECT_LE((fit_multi_output(s, X, Y).predict(X) - Y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ModelIo, DimensionMismatchIsAnError) {
  std::mt19937_64 rng(6);
  const MultiOutputModel m = fit_multi_output(ModelSpec{}, uniform_matrix(rng, 10, 3), uniform_matrix(rng, 10, 2));
  EXPECT_THROW(m.predict(uniform_matrix(rng, 2, 4)), Error);
  EXPECT_THROW(m.targets[0].predict(uniform_matrix(rng, 2, 2)), Error);
}

TEST(ModelIo, RejectsMalformedDocuments) {
  EXPECT_THROW(multi_output_from_json(nlohmann::ordered_json::parse(R"({"format":"x"})")), Error);
  EXPECT_THROW(multi_output_from_json(nlohmann::ordered_json::parse(R"({"format":"btof-model","version":9})")), Error);
  std::mt19937_64 rng(7);
  const MultiOutputModel m = fit_multi_output(ModelSpec{}, uniform_matrix(rng, 10, 3), uniform_matrix(rng, 10, 1));
  auto j = to_json(m);
  j["targets"][0]["input_dim"] = 5;
  EXPECT_THROW(multi_output_from_json(j), Error);
  j = to_json(m);
  j["targets"][0]["family"] = "svm";
  EXPECT_THROW(multi_output_from_json(j), Error);
}

TEST(ModelIo, SpecValidation) {
  ModelSpec s;
  s.lambda = -1;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.family = Family::gbt;
  s.learning_rate = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.family = Family::knn;
  s.k = 0;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_EQ(parse_family("random_forest"), Family::random_forest);
  EXPECT_THROW(parse_family("svm"), Error);
}
