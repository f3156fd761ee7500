#include <gtest/gtest.h>

#include "btof/stats.hpp"
#include "btof/synth.hpp"
#include "test_util.hpp"

using namespace btof;

namespace {
std::optional<double> sp(std::vector<double> a, std::vector<double> b) { return spearman(a, b); }
}  // namespace

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(*sp({1, 2, 3}, {10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(*sp({1, 2, 3}, {3, 2, 1}), -1.0);
  EXPECT_NEAR(*sp({1, 1, 2}, {1, 2, 3}), 0.8660, 1e-4);
}

TEST(Spearman, AverageRanksForTies) {
  const std::vector<double> v{3, 1, 3, 2, 3};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Spearman, ErrorsAndConstantSentinel) {
  EXPECT_THROW(sp({1, 2}, {1, 2, 3}), Error);
  EXPECT_THROW(sp({1}, {1}), Error);
  EXPECT_FALSE(sp({2, 2, 2}, {1, 2, 3}).has_value());
  EXPECT_FALSE(sp({1, 2, 3}, {0, 0, 0}).has_value());
}

TEST(Spearman, SelfAndAntisymmetry) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(30), neg(30);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::round(n(rng) * 3);
      neg[i] = -a[i];
    }
    EXPECT_NEAR(*spearman(a, a), 1.0, 1e-12);
    EXPECT_NEAR(*spearman(a, neg), -1.0, 1e-12);
  }
}

TEST(Spearman, MatchesCountingOracleWithTies) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng() % 200;
    const int levels = 1 + static_cast<int>(rng() % 20);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng() % levels);
      b[i] = static_cast<double>(rng() % (levels + 3));
    }
    const auto got = spearman(a, b);
    if (!got) continue;
    EXPECT_NEAR(*got, testutil::brute_spearman(a, b), 1e-12);
  }
}

TEST(Spearman, InvariantUnderIncreasingMaps) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(40), b(40), fa(40), gb(40);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::round(n(rng) * 4);
      b[i] = a[i] + n(rng);
      fa[i] = std::exp(a[i] / 3.0) + 7.0;
      gb[i] = b[i] * b[i] * b[i] - 2.0;
    }
    EXPECT_NEAR(*spearman(fa, gb), *spearman(a, b), 1e-12);
  }
}

TEST(CorrTable, UnitDiagonalSymmetryAndScaleInvariance) {
  std::mt19937_64 rng(4);
  const DemandCube c = testutil::random_cube(rng, 3, 20, 3, false);
  const FrontierLayout layout = FrontierLayout::make(3, 1);
  Dataset d = pool_frontiers(frontiers_for_all(c, layout), layout);
  const CorrTable t = correlation_table(d, 3);
  ASSERT_EQ(t.size(), layout.x.size() + layout.y.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    ASSERT_TRUE(t.at(r, r).has_value());
    EXPECT_EQ(*t.at(r, r), 1.0);
    for (std::size_t c2 = 0; c2 < t.size(); ++c2) {
      EXPECT_EQ(t.at(r, c2), t.at(c2, r));
      EXPECT_LE(std::abs(*t.at(r, c2)), 1.0 + 1e-12);
    }
  }
  Dataset scaled = d;
  for (Eigen::Index k = 0; k < scaled.X.cols(); ++k) scaled.X.col(k) *= 0.5 + static_cast<double>(k);
  scaled.Y *= 3.0;
  const CorrTable s = correlation_table(scaled, 1);
  EXPECT_EQ(s.entries, t.entries);
}

TEST(CorrTable, ConstantColumnIsFlagged) {
  DemandCube c({"A", "B"}, 0, 9, 2, Semantics::gross);
  for (std::size_t i = 0; i < 2; ++i)
    for (int t = 0; t < 10; ++t) c.at(i, t, 0) = t + 3 * static_cast<int>(i);  // h = 1 stays 0
  const FrontierLayout layout = FrontierLayout::make(2, 0);
  const CorrTable t = correlation_table(pool_frontiers(frontiers_for_all(c, layout), layout));
  EXPECT_EQ(t.undefined_columns(), (std::vector<std::string>{"x1_z01", "x2_z11", "y2_z21"}));
  EXPECT_FALSE(t.between("x0_z00", "x1_z01").has_value());
  EXPECT_TRUE(t.between("x0_z00", "y0_z10").has_value());
  std::ostringstream os;
  write_corr_csv(os, t);
  EXPECT_NE(os.str().find("NA"), std::string::npos);
  EXPECT_EQ(os.str().substr(0, 5), "slot,");
}

TEST(CorrTable, GrossAnticipationEntryDropsWhenDifferenced) {
  SynthConfig sc;
  sc.n_items = 60;
  sc.seed = 5;
  const DemandCube g = generate(sc);
  const FrontierLayout layout = FrontierLayout::make(4, 1);
  const auto entry = [&](const DemandCube& c) {
    return *correlation_table(pool_frontiers(frontiers_for_all(c, layout), layout)).between("x4_z11", "y0_z10");
  };
  const double gross = entry(g), net = entry(difference(g));
  EXPECT_GE(gross, 0.9);
  EXPECT_LT(net, gross);
}
