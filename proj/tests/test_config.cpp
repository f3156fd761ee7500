#include <gtest/gtest.h>

#include <sstream>

#include "btof/config.hpp"

using namespace btof;

namespace {

TrainConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_train_config(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsMatchDocumentedGrids) {
  const TrainConfig c;
  EXPECT_EQ(c.horizon, 4);
  EXPECT_EQ(c.experiment.dev_periods, 37);
  EXPECT_EQ(c.experiment.holdout_periods, 8);
  EXPECT_EQ(c.experiment.folds, 10);
  EXPECT_EQ(*c.grid_values("ridge.lambda"), (std::vector<std::string>{"0.01", "0.1", "1", "10"}));
  EXPECT_EQ(*c.grid_values("knn.k"), (std::vector<std::string>{"1", "3", "5", "10"}));
  EXPECT_EQ(*c.grid_values("gbt.max_depth"), (std::vector<std::string>{"2", "3", "5"}));
  EXPECT_EQ(*c.grid_values("gbt.n_estimators"), (std::vector<std::string>{"100", "500"}));
  EXPECT_EQ(*c.grid_values("gbt.learning_rate"), (std::vector<std::string>{"0.05", "0.1"}));
  EXPECT_EQ(*c.grid_values("mlp.epochs"), (std::vector<std::string>{"50", "200"}));
  EXPECT_EQ(c.grid_values("svm.c"), nullptr);
}

TEST(Config, ParsesTomlStyleSubset) {
  const TrainConfig c = parse(
      "# comment\n"
      "[experiment]\n"
      "input = \"data # 1.csv\"  # trailing\n"
      "mode = df_one_by_one\n"
      "transform = log\n"
      "folds = 5\n"
      "difference = true\n"
      "models = [\"ridge\", \"gbt\"]\n"
      "ridge.lambda = [0.5, 2]\n"
      "seed = 9\n");
  EXPECT_EQ(c.input, "data # 1.csv");
  EXPECT_EQ(c.experiment.mode, Mode::df_one_by_one);
  EXPECT_EQ(c.experiment.transform, TransformKind::log);
  EXPECT_EQ(c.experiment.folds, 5);
  EXPECT_TRUE(c.experiment.difference);
  EXPECT_EQ(c.families, (std::vector<std::string>{"ridge", "gbt"}));
  EXPECT_EQ(*c.grid_values("ridge.lambda"), (std::vector<std::string>{"0.5", "2"}));
  EXPECT_EQ(c.experiment.seed, 9u);
}

TEST(Config, ErrorsNameLineAndKey) {
  EXPECT_EQ(error_of("mode = no_df\nbogus = 1\n"), "config line 2: config: unknown key 'bogus'");
  EXPECT_NE(error_of("folds = many\n").find("config line 1"), std::string::npos);
  EXPECT_NE(error_of("just words\n").find("expected key = value"), std::string::npos);
  EXPECT_NE(error_of("models = ridge,svm\n").find("svm"), std::string::npos);
  EXPECT_NE(error_of("ridge.lambda = []\n").find("at least one value"), std::string::npos);
  EXPECT_NE(error_of("difference = maybe\n").find("difference"), std::string::npos);
}

TEST(Config, GridExpansionIsCartesianLastAxisFastest) {
  const TrainConfig c = parse("models = gbt\ngbt.n_estimators = 10,20\ngbt.learning_rate = 0.1\ngbt.max_depth = 1,2,3\n");
  const auto specs = expand_grid(c);
  ASSERT_EQ(specs.size(), 6u);
  EXPECT_EQ(specs[0].n_estimators, 10);
  EXPECT_EQ(specs[0].max_depth, 1);
  EXPECT_EQ(specs[1].max_depth, 2);
  EXPECT_EQ(specs[3].n_estimators, 20);
  for (const auto& s : specs) {
    EXPECT_EQ(s.family, models::Family::gbt);
    EXPECT_EQ(s.seed, c.experiment.seed);
  }
}

TEST(Config, DefaultGridSize) {
  // ridge 4, lasso 4, knn 4, tree 3, forest 2*3, gbt 2*2*3, mlp 2.
  EXPECT_EQ(expand_grid(TrainConfig{}).size(), 4u + 4 + 4 + 3 + 6 + 12 + 2);
}

TEST(Config, HiddenLayersAndValidation) {
  const auto specs = expand_grid(parse("models = mlp\nmlp.hidden = 80x20,16\nmlp.epochs = 5\n"));
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].hidden, (std::vector<int>{80, 20}));
  EXPECT_EQ(specs[1].hidden, (std::vector<int>{16}));
  EXPECT_THROW(expand_grid(parse("models = knn\nknn.k = 0\n")), Error);
}

TEST(Config, DefaultsTextRoundTrips) {
  const TrainConfig c;
  const TrainConfig back = parse(c.defaults_text());
  EXPECT_EQ(back.canonical(), c.canonical());
  EXPECT_EQ(back.out, c.out);
}

TEST(Config, CanonicalFormIgnoresPathsAndThreads) {
  TrainConfig a, b;
  b.input = "elsewhere.csv";
  b.out = "x";
  b.threads = 8;
  EXPECT_EQ(a.canonical(), b.canonical());
  b.experiment.seed = 1;
  EXPECT_NE(a.canonical(), b.canonical());
}
