#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "btof/diagonal.hpp"
#include "btof/error.hpp"
#include "btof/eval.hpp"
#include "btof/log.hpp"
#include "btof/models/model.hpp"
#include "btof/orderbook.hpp"
#include "btof/parallel.hpp"
#include "btof/rng.hpp"

namespace btof {

// ---- target transforms ----------------------------------------------------

enum class TransformKind { identity, log, minmax };

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::log: return "log";
    case TransformKind::minmax: return "minmax";
  }
  return "?";
}

inline TransformKind parse_transform(std::string_view s) {
  if (s == "identity" || s == "none") return TransformKind::identity;
  if (s == "log") return TransformKind::log;
  if (s == "minmax") return TransformKind::minmax;
  throw Error("unknown transform '" + std::string(s) + "' (expected identity|log|minmax)");
}

// Per-target-column transform. log is log(1 + v); minmax maps the fitted
// [min, max] of each column to [0, 1] and sends constant columns to 0.
struct TransformState {
  TransformKind kind = TransformKind::identity;
  bool fitted = false;
  Eigen::VectorXd min, max;

  static TransformState fit(TransformKind kind, const Eigen::MatrixXd& Y) {
    TransformState s;
    s.kind = kind;
    s.fitted = true;
    if (kind == TransformKind::minmax) {
      if (Y.rows() == 0) throw Error("minmax: cannot fit on zero rows");
      s.min = Y.colwise().minCoeff().transpose();
      s.max = Y.colwise().maxCoeff().transpose();
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& Y) const {
    switch (kind) {
      case TransformKind::identity: return Y;
      case TransformKind::log:
        if ((Y.array() < 0.0).any()) throw Error("log transform of a negative value");
        return Y.array().log1p().matrix();
      case TransformKind::minmax: {
        check_minmax(Y.cols());
        Eigen::MatrixXd out(Y.rows(), Y.cols());
        for (Eigen::Index c = 0; c < Y.cols(); ++c) {
          const double span = max(c) - min(c);
          if (span > 0.0)
            out.col(c) = (Y.col(c).array() - min(c)) / span;
          else
            out.col(c).setZero();
        }
        return out;
      }
    }
    return Y;
  }

  Eigen::MatrixXd invert(const Eigen::MatrixXd& Z) const {
    switch (kind) {
      case TransformKind::identity: return Z;
      case TransformKind::log: return Z.array().expm1().matrix();
      case TransformKind::minmax: {
        check_minmax(Z.cols());
        Eigen::MatrixXd out(Z.rows(), Z.cols());
        for (Eigen::Index c = 0; c < Z.cols(); ++c) out.col(c) = Z.col(c).array() * (max(c) - min(c)) + min(c);
        return out;
      }
    }
    return Z;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"kind", to_string(kind)}};
    if (kind == TransformKind::minmax) {
      j["min"] = std::vector<double>(min.data(), min.data() + min.size());
      j["max"] = std::vector<double>(max.data(), max.data() + max.size());
    }
    return j;
  }

  static TransformState from_json(const nlohmann::ordered_json& j) {
    TransformState s;
    s.kind = parse_transform(j.at("kind").get<std::string>());
    s.fitted = true;
    if (s.kind == TransformKind::minmax) {
      const auto lo = j.at("min").get<std::vector<double>>(), hi = j.at("max").get<std::vector<double>>();
      if (lo.size() != hi.size()) throw Error("transform: min/max length mismatch");
      s.min = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
      s.max = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    }
    return s;
  }

 private:
  void check_minmax(Eigen::Index cols) const {
    if (!fitted) throw Error("minmax transform used before fit");
    if (min.size() != cols) throw Error("minmax transform fitted on a different number of targets");
  }
};

// ---- dev / holdout split --------------------------------------------------

struct SplitCounts {
  std::size_t dev = 0, dropped = 0, holdout = 0, total = 0;
};

struct SplitResult {
  ItemFrontiers dev;
  ItemFrontiers holdout;
  std::vector<std::pair<std::string, SplitCounts>> counts;
  std::vector<std::string> excluded;  // items with no dev frontier
};

// Holdout: frontiers whose earliest target period t+1 lies in the last
// `holdout_periods` periods. Dev: frontiers whose latest target period t+H
// lies inside the first `dev_periods` periods and before the holdout. The rest
// straddle the boundary and are dropped.
inline SplitResult split_dev_holdout(const ItemFrontiers& per_item, int horizon, std::int64_t first_period,
                                     std::int64_t last_period, int dev_periods, int holdout_periods) {
  if (dev_periods < 1 || holdout_periods < 0) throw Error("dev_periods must be >= 1 and holdout_periods >= 0");
  const std::int64_t T = last_period - first_period + 1;
  if (dev_periods + holdout_periods > T)
    throw Error("dev_periods + holdout_periods = " + std::to_string(dev_periods + holdout_periods) +
                " exceeds the " + std::to_string(T) + " available periods");
  const std::int64_t holdout_start = last_period - holdout_periods + 1;
  const std::int64_t dev_end = std::min(first_period + dev_periods - 1, holdout_start - 1);
  SplitResult out;
  for (const auto& [item, samples] : per_item) {
    SplitCounts c;
    c.total = samples.size();
    std::vector<FrontierSample> dev, hold;
    for (const auto& s : samples) {
      if (holdout_periods > 0 && s.t + 1 >= holdout_start)
        hold.push_back(s);
      else if (s.t + horizon <= dev_end)
        dev.push_back(s);
      else
        ++c.dropped;
    }
    c.dev = dev.size();
    c.holdout = hold.size();
    out.counts.emplace_back(item, c);
    if (dev.empty()) {
      log_warning("item '" + item + "' has no development frontiers; excluded");
      out.excluded.push_back(item);
      continue;
    }
    out.dev.emplace_back(item, std::move(dev));
    out.holdout.emplace_back(item, std::move(hold));
  }
  return out;
}

// ---- cross-validation -----------------------------------------------------

enum class CvScheme { blocked, shuffled };

inline const char* to_string(CvScheme s) { return s == CvScheme::blocked ? "blocked" : "shuffled"; }
inline CvScheme parse_cv_scheme(std::string_view s) {
  if (s == "blocked") return CvScheme::blocked;
  if (s == "shuffled") return CvScheme::shuffled;
  throw Error("unknown cv scheme '" + std::string(s) + "' (expected blocked|shuffled)");
}

// Fold of each position 0..n-1. Blocked folds are contiguous runs; shuffled
// folds are the same runs laid over a seeded permutation. The first n % folds
// folds are one larger.
inline std::vector<int> kfold_indices(std::size_t n, int folds, CvScheme scheme, std::uint64_t seed) {
  if (folds < 1) throw Error("folds must be >= 1");
  if (static_cast<std::size_t>(folds) > n)
    throw Error("folds (" + std::to_string(folds) + ") exceed rows (" + std::to_string(n) + ")");
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  if (scheme == CvScheme::shuffled) {
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(pos[i - 1], pos[uniform_index(rng, i)]);
  }
  std::vector<int> fold(n);
  const std::size_t base = n / static_cast<std::size_t>(folds), extra = n % static_cast<std::size_t>(folds);
  std::size_t p = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) fold[pos[p++]] = f;
  }
  return fold;
}

// Fold of each dataset row. Blocked folds follow time (t, then pooled row order).
inline std::vector<int> dataset_folds(const Dataset& d, int folds, CvScheme scheme, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(d.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.rows[a].t < d.rows[b].t; });
  const auto by_pos = kfold_indices(n, folds, scheme, seed);
  std::vector<int> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[order[p]] = by_pos[p];
  return fold;
}

// SMAPE entries of integer-postprocessed predictions against actual targets.
inline std::vector<SmapeEntry> smape_entries(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& predicted,
                                             const std::vector<Provenance>& rows, std::string_view method) {
  std::vector<SmapeEntry> out;
  out.reserve(static_cast<std::size_t>(actual.size()));
  for (Eigen::Index r = 0; r < actual.rows(); ++r)
    for (Eigen::Index j = 0; j < actual.cols(); ++j) {
      const auto& p = rows[static_cast<std::size_t>(r)];
      const auto f = postprocess_forecast(predicted(r, j), std::string(method) + ", item '" + p.item + "', t=" +
                                                               std::to_string(p.t) + ", slot " + std::to_string(j));
      out.push_back({static_cast<std::size_t>(j), p.item, p.t, smape_point(actual(r, j), static_cast<double>(f))});
    }
  return out;
}

// Mean over target slots of the two-stage (frontiers, then items) SMAPE.
inline double score_predictions(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& predicted,
                                const std::vector<Provenance>& rows) {
  return aggregate(smape_entries(actual, predicted, rows, "cv"), static_cast<std::size_t>(actual.cols())).overall();
}

struct FittedPipeline {
  TransformState transform;
  models::MultiOutputModel model;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const { return transform.invert(model.predict(X)); }
};

inline FittedPipeline fit_pipeline(const models::ModelSpec& spec, const Dataset& train, TransformKind transform,
                                   std::span<const std::uint64_t> keys, std::size_t threads) {
  FittedPipeline p;
  p.transform = TransformState::fit(transform, train.Y);
  p.model = models::fit_multi_output(spec, train.X, p.transform.apply(train.Y), keys, threads);
  return p;
}

struct GridRow {
  models::ModelSpec spec;
  std::vector<double> fold_scores;  // NaN where the fit failed
  double mean = 0.0;                // +inf when every fold failed
  std::string error;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["best"] = rows.at(best).spec.describe();
    j["best_hyperparameters"] = rows.at(best).spec.hyperparameters();
    j["best_cv_smape"] = rows.at(best).mean;
    auto table = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json row{{"spec", r.spec.describe()}};
      row["cv_smape"] = std::isfinite(r.mean) ? nlohmann::ordered_json(r.mean) : nlohmann::ordered_json("inf");
      auto folds = nlohmann::ordered_json::array();
      for (double s : r.fold_scores) folds.push_back(std::isnan(s) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s));
      row["folds"] = folds;
      if (!r.error.empty()) row["error"] = r.error;
      table.push_back(row);
    }
    j["cv_table"] = table;
    return j;
  }
};

// Picks the spec with the lowest mean cross-validated SMAPE (on the original
// scale, after inverse transform and integer postprocessing). Ties go to the
// earlier grid entry. `keys` are per-row identities for the tree ensembles.
inline GridResult grid_search(const Dataset& dev, const std::vector<models::ModelSpec>& grid, int folds,
                              CvScheme scheme, TransformKind transform, std::uint64_t seed,
                              std::span<const std::uint64_t> keys = {}, std::size_t threads = 1) {
  if (grid.empty()) throw Error("grid_search: empty grid");
  if (!keys.empty() && keys.size() != static_cast<std::size_t>(dev.size())) throw Error("grid_search: key count mismatch");
  const auto fold_of = dataset_folds(dev, folds, scheme, seed);
  std::vector<std::vector<std::size_t>> train_idx(static_cast<std::size_t>(folds)), valid_idx(static_cast<std::size_t>(folds));
  for (std::size_t r = 0; r < fold_of.size(); ++r)
    for (int f = 0; f < folds; ++f) (fold_of[r] == f ? valid_idx : train_idx)[static_cast<std::size_t>(f)].push_back(r);

  GridResult result;
  result.rows.resize(grid.size());
  std::vector<std::string> errors(grid.size() * static_cast<std::size_t>(folds));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.rows[g].spec = grid[g];
    result.rows[g].fold_scores.assign(static_cast<std::size_t>(folds), std::nan(""));
  }
  parallel_for(grid.size() * static_cast<std::size_t>(folds), threads, [&](std::size_t task) {
    const std::size_t g = task / static_cast<std::size_t>(folds), f = task % static_cast<std::size_t>(folds);
    try {
      const Dataset train = dev.subset(train_idx[f]);
      const Dataset valid = dev.subset(valid_idx[f]);
      std::vector<std::uint64_t> fold_keys;
      for (auto r : train_idx[f])
        if (!keys.empty()) fold_keys.push_back(keys[r]);
      const auto pipe = fit_pipeline(grid[g], train, transform, fold_keys, 1);
      result.rows[g].fold_scores[f] = score_predictions(valid.Y, pipe.predict(valid.X), valid.rows);
    } catch (const Error& e) {
      errors[task] = e.what();
    }
  });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& row = result.rows[g];
    double sum = 0.0;
    std::size_t ok = 0;
    for (std::size_t f = 0; f < row.fold_scores.size(); ++f) {
      if (!std::isnan(row.fold_scores[f])) {
        sum += row.fold_scores[f];
        ++ok;
      } else if (row.error.empty()) {
        row.error = errors[g * static_cast<std::size_t>(folds) + f];
      }
    }
    row.mean = ok ? sum / static_cast<double>(ok) : std::numeric_limits<double>::infinity();
    if (!ok) log_warning("spec " + row.spec.describe() + " failed on every fold: " + row.error);
    if (g == 0 || row.mean < best) {
      best = row.mean;
      result.best = g;
    }
  }
  return result;
}

// ---- experiments ----------------------------------------------------------

enum class Mode { no_df, df_one_by_one, df_all_items };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::no_df: return "no_df";
    case Mode::df_one_by_one: return "df_one_by_one";
    case Mode::df_all_items: return "df_all_items";
  }
  return "?";
}
inline Mode parse_mode(std::string_view s) {
  if (s == "no_df") return Mode::no_df;
  if (s == "df_one_by_one") return Mode::df_one_by_one;
  if (s == "df_all_items") return Mode::df_all_items;
  throw Error("unknown mode '" + std::string(s) + "' (expected no_df|df_one_by_one|df_all_items)");
}

struct ExperimentConfig {
  Mode mode = Mode::df_all_items;
  TransformKind transform = TransformKind::identity;
  std::vector<models::ModelSpec> grid;
  int dev_periods = 37;
  int holdout_periods = 8;
  int folds = 10;
  CvScheme cv_scheme = CvScheme::blocked;
  int lags = 1;          // lagged full rows appended to the frontier
  int feature_lags = 6;  // lag depth of the no_df feature set
  bool difference = false;
  bool baseline = true;  // also score the naive last-value forecast
  std::uint64_t seed = 42;
};

// Features of the no_df mode for frontier t: q_{t+1-l}^h for l = 1..L and every
// h, the 3-period rolling mean of q^0 ending at t, and the period index.
inline std::vector<FrontierSample> build_lag_features(const DemandCube& cube, std::size_t item,
                                                      const FrontierLayout& y_layout, int feature_lags) {
  if (feature_lags < 1) throw Error("empty feature set: no_df needs feature_lags >= 1");
  const int H = cube.horizon();
  const std::int64_t lo = cube.first_period() + std::max(feature_lags - 1, 2);
  const std::int64_t hi = cube.last_period() - H;
  std::vector<FrontierSample> out;
  for (auto t = lo; t <= hi; ++t) {
    FrontierSample s;
    s.item = cube.items()[item];
    s.t = t;
    for (int l = 1; l <= feature_lags; ++l)
      for (int h = 0; h < H; ++h) s.x.push_back(static_cast<double>(cube.at(item, t + 1 - l, h)));
    s.x.push_back(static_cast<double>(cube.at(item, t, 0) + cube.at(item, t - 1, 0) + cube.at(item, t - 2, 0)) / 3.0);
    s.x.push_back(static_cast<double>(t - cube.first_period()));
    for (const Slot& slot : y_layout.y) s.y.push_back(static_cast<double>(cube.at(item, t + slot.offset, slot.delivery_date)));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<std::string> lag_feature_names(int horizon, int feature_lags) {
  std::vector<std::string> names;
  for (int l = 1; l <= feature_lags; ++l)
    for (int h = 0; h < horizon; ++h) names.push_back("lag" + std::to_string(l) + "_h" + std::to_string(h));
  names.push_back("rollmean3_h0");
  names.push_back("period_index");
  return names;
}

// Frontiers and split for one experiment; cube already differenced if asked.
struct PreparedData {
  DemandCube cube;
  FrontierLayout layout;
  std::vector<std::string> x_names;
  SplitResult split;
  std::map<std::string, std::size_t> item_pos;

  Dataset pooled(const ItemFrontiers& part) const {
    return x_names.empty() ? pool_frontiers(part, layout) : pool_rows(part, layout, x_names);
  }

  // Stable identity of (item, t): cube position and period offset.
  std::vector<std::uint64_t> keys(const Dataset& d) const {
    std::vector<std::uint64_t> k;
    k.reserve(d.rows.size());
    for (const auto& r : d.rows)
      k.push_back((static_cast<std::uint64_t>(item_pos.at(r.item)) << 32) |
                  static_cast<std::uint64_t>(r.t - cube.first_period()));
    return k;
  }
};

inline PreparedData prepare_data(const ExperimentConfig& cfg, const DemandCube& input) {
  PreparedData p;
  p.cube = cfg.difference ? difference(input) : input;
  const int H = p.cube.horizon();
  ItemFrontiers frontiers;
  if (cfg.mode == Mode::no_df) {
    p.layout = FrontierLayout::make(H, 0);
    p.x_names = lag_feature_names(H, cfg.feature_lags);
    for (std::size_t i = 0; i < p.cube.item_count(); ++i)
      frontiers.emplace_back(p.cube.items()[i], build_lag_features(p.cube, i, p.layout, cfg.feature_lags));
    // x slots are not frontier slots here; keep only the y layout.
    p.layout.x.clear();
  } else {
    p.layout = FrontierLayout::make(H, cfg.lags);
    frontiers = frontiers_for_all(p.cube, p.layout);
  }
  for (std::size_t i = 0; i < p.cube.item_count(); ++i) p.item_pos.emplace(p.cube.items()[i], i);
  p.split = split_dev_holdout(frontiers, H, p.cube.first_period(), p.cube.last_period(), cfg.dev_periods,
                              cfg.holdout_periods);
  if (p.split.dev.empty()) throw Error("no item has development frontiers");
  return p;
}

struct ForecastRow {
  std::string method;
  std::string item;
  std::int64_t t = 0;
  std::size_t slot = 0;
  std::int64_t period = 0;
  int delivery_date = 0;
  double actual = 0.0;
  std::int64_t forecast = 0;
};

// A trained method, serializable for `evaluate`. Pooled modes hold one entry
// with an empty item; per-item modes hold one entry per item.
struct ModelBundle {
  std::string method;
  Mode mode = Mode::df_all_items;
  int horizon = 4;
  int lags = 1;
  int feature_lags = 6;
  bool difference = false;
  int dev_periods = 37;
  int holdout_periods = 8;
  // Ingestion settings the models were trained under.
  std::string semantics = "gross";
  double min_nonzero_frac = 0.0;
  struct Entry {
    std::string item;
    FittedPipeline pipeline;
  };
  std::vector<Entry> entries;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "btof-bundle";
    j["version"] = 1;
    j["method"] = method;
    j["mode"] = to_string(mode);
    j["horizon"] = horizon;
    j["lags"] = lags;
    j["feature_lags"] = feature_lags;
    j["difference"] = difference;
    j["dev_periods"] = dev_periods;
    j["holdout_periods"] = holdout_periods;
    j["semantics"] = semantics;
    j["min_nonzero_frac"] = min_nonzero_frac;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries)
      arr.push_back({{"item", e.item.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(e.item)},
                     {"transform", e.pipeline.transform.to_json()},
                     {"model", models::to_json(e.pipeline.model)}});
    j["entries"] = arr;
    return j;
  }

  static ModelBundle from_json(const nlohmann::ordered_json& j) {
    if (j.value("format", std::string{}) != "btof-bundle") throw Error("not a btof model bundle");
    if (j.value("version", 0) != 1) throw Error("unsupported bundle version " + std::to_string(j.value("version", 0)));
    ModelBundle b;
    b.method = j.at("method").get<std::string>();
    b.mode = parse_mode(j.at("mode").get<std::string>());
    b.horizon = j.at("horizon").get<int>();
    b.lags = j.at("lags").get<int>();
    b.feature_lags = j.at("feature_lags").get<int>();
    b.difference = j.at("difference").get<bool>();
    b.dev_periods = j.at("dev_periods").get<int>();
    b.holdout_periods = j.at("holdout_periods").get<int>();
    b.semantics = j.value("semantics", std::string("gross"));
    b.min_nonzero_frac = j.value("min_nonzero_frac", 0.0);
    for (const auto& e : j.at("entries")) {
      Entry entry;
      if (!e.at("item").is_null()) entry.item = e.at("item").get<std::string>();
      entry.pipeline.transform = TransformState::from_json(e.at("transform"));
      entry.pipeline.model = models::multi_output_from_json(e.at("model"));
      b.entries.push_back(std::move(entry));
    }
    if (b.entries.empty()) throw Error("bundle holds no models");
    return b;
  }

  ExperimentConfig config() const {
    ExperimentConfig c;
    c.mode = mode;
    c.lags = lags;
    c.feature_lags = feature_lags;
    c.difference = difference;
    c.dev_periods = dev_periods;
    c.holdout_periods = holdout_periods;
    return c;
  }
};

struct ExperimentResult {
  EvalReport report;
  std::vector<ModelBundle> bundles;
  std::vector<ForecastRow> forecasts;
};

namespace detail {

inline void append_forecasts(std::vector<ForecastRow>& out, const std::string& method, const Dataset& d,
                             const Eigen::MatrixXd& predicted) {
  for (Eigen::Index r = 0; r < d.size(); ++r)
    for (Eigen::Index j = 0; j < d.Y.cols(); ++j) {
      const auto& p = d.rows[static_cast<std::size_t>(r)];
      const Slot& s = d.layout.y[static_cast<std::size_t>(j)];
      out.push_back({method, p.item, p.t, static_cast<std::size_t>(j), p.t + s.offset, s.delivery_date, d.Y(r, j),
                     postprocess_forecast(predicted(r, j))});
    }
}

inline std::vector<std::string> item_names(const ItemFrontiers& f) {
  std::vector<std::string> out;
  for (const auto& [item, samples] : f) out.push_back(item);
  return out;
}

inline std::vector<std::string> items_with_rows(const ItemFrontiers& f) {
  std::vector<std::string> out;
  for (const auto& [item, samples] : f)
    if (!samples.empty()) out.push_back(item);
  return out;
}

}  // namespace detail

// Scores a trained bundle on the holdout frontiers of `prep`.
inline MethodResult evaluate_bundle(const ModelBundle& bundle, const PreparedData& prep, TransformKind transform_tag,
                                    std::vector<ForecastRow>* forecasts = nullptr) {
  MethodResult m;
  m.method = bundle.method;
  m.mode = to_string(bundle.mode);
  m.transform = to_string(transform_tag);
  const std::size_t slots = prep.layout.y.size();
  if (bundle.mode == Mode::df_all_items) {
    const Dataset hold = prep.pooled(prep.split.holdout);
    if (hold.size() > 0) {
      const Eigen::MatrixXd pred = bundle.entries.front().pipeline.predict(hold.X);
      m.entries = smape_entries(hold.Y, pred, hold.rows, bundle.method);
      if (forecasts) detail::append_forecasts(*forecasts, bundle.method, hold, pred);
    }
  } else {
    std::map<std::string, const FittedPipeline*> by_item;
    for (const auto& e : bundle.entries) by_item[e.item] = &e.pipeline;
    for (const auto& [item, samples] : prep.split.holdout) {
      if (samples.empty()) continue;
      auto it = by_item.find(item);
      if (it == by_item.end()) {
        m.failures.push_back(item + ": no trained model");
        continue;
      }
      const Dataset hold = prep.pooled({{item, samples}});
      const Eigen::MatrixXd pred = it->second->predict(hold.X);
      auto e = smape_entries(hold.Y, pred, hold.rows, bundle.method);
      m.entries.insert(m.entries.end(), e.begin(), e.end());
      if (forecasts) detail::append_forecasts(*forecasts, bundle.method, hold, pred);
    }
  }
  m.agg = aggregate(m.entries, slots, detail::item_names(prep.split.holdout));
  return m;
}

// Naive last-value forecast: q^_{t+p}^j = q_t^j, the latest fully revealed row.
inline MethodResult naive_baseline(const PreparedData& prep, std::string_view mode, std::vector<ForecastRow>* forecasts) {
  MethodResult m;
  m.method = "naive";
  m.mode = std::string(mode);
  m.transform = "identity";
  m.baseline = true;
  m.selected = {{"rule", "q[t+p][j] = q[t][j]"}};
  const Dataset hold = prep.pooled(prep.split.holdout);
  Eigen::MatrixXd pred(hold.size(), hold.Y.cols());
  for (Eigen::Index r = 0; r < hold.size(); ++r) {
    const auto& p = hold.rows[static_cast<std::size_t>(r)];
    const std::size_t i = prep.cube.item_index(p.item);
    for (Eigen::Index j = 0; j < hold.Y.cols(); ++j)
      pred(r, j) = static_cast<double>(prep.cube.at(i, p.t, prep.layout.y[static_cast<std::size_t>(j)].delivery_date));
  }
  if (hold.size() > 0) {
    m.entries = smape_entries(hold.Y, pred, hold.rows, "naive");
    if (forecasts) detail::append_forecasts(*forecasts, "naive", hold, pred);
  }
  m.agg = aggregate(m.entries, prep.layout.y.size(), detail::item_names(prep.split.holdout));
  return m;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Runs the full selection + holdout evaluation for every model family in the
// grid (grouped in order of first appearance). Deterministic for a fixed
// config regardless of `threads`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const DemandCube& input, std::size_t threads = 1) {
  if (cfg.grid.empty()) throw Error("experiment grid is empty");
  if (cfg.folds < 2) throw Error("folds must be >= 2");
  if (cfg.mode == Mode::no_df && cfg.feature_lags < 1) throw Error("empty feature set: no_df needs feature_lags >= 1");
  const PreparedData prep = prepare_data(cfg, input);
  ExperimentResult res;
  res.report.slots = prep.layout.y.size();

  std::vector<models::Family> families;
  for (const auto& s : cfg.grid)
    if (std::find(families.begin(), families.end(), s.family) == families.end()) families.push_back(s.family);

  for (models::Family fam : families) {
    std::vector<models::ModelSpec> grid;
    for (const auto& s : cfg.grid)
      if (s.family == fam) grid.push_back(s);
    ModelBundle bundle;
    bundle.method = to_string(fam);
    bundle.mode = cfg.mode;
    bundle.horizon = prep.cube.horizon();
    bundle.lags = cfg.lags;
    bundle.feature_lags = cfg.feature_lags;
    bundle.difference = cfg.difference;
    bundle.dev_periods = cfg.dev_periods;
    bundle.holdout_periods = cfg.holdout_periods;
    nlohmann::ordered_json selected;
    std::vector<std::string> failures;

    if (cfg.mode == Mode::df_all_items) {
      const Dataset dev = prep.pooled(prep.split.dev);
      const auto keys = prep.keys(dev);
      const GridResult gr = grid_search(dev, grid, cfg.folds, cfg.cv_scheme, cfg.transform, cfg.seed, keys, threads);
      selected = gr.to_json();
      if (!std::isfinite(gr.rows[gr.best].mean)) {
        failures.push_back("every spec failed: " + gr.rows[gr.best].error);
      } else {
        bundle.entries.push_back({"", fit_pipeline(gr.rows[gr.best].spec, dev, cfg.transform, keys, threads)});
      }
    } else {
      const auto& dev_items = prep.split.dev;
      std::vector<std::optional<FittedPipeline>> fitted(dev_items.size());
      std::vector<nlohmann::ordered_json> choice(dev_items.size());
      std::vector<std::string> errs(dev_items.size());
      parallel_for(dev_items.size(), threads, [&](std::size_t k) {
        const auto& [item, samples] = dev_items[k];
        try {
          const Dataset dev = prep.pooled({{item, samples}});
          const auto keys = prep.keys(dev);
          const GridResult gr = grid_search(dev, grid, cfg.folds, cfg.cv_scheme, cfg.transform, cfg.seed, keys, 1);
          if (!std::isfinite(gr.rows[gr.best].mean)) throw Error("every spec failed: " + gr.rows[gr.best].error);
          choice[k] = {{"item", item}, {"best", gr.rows[gr.best].spec.describe()}, {"cv_smape", gr.rows[gr.best].mean}};
          fitted[k] = fit_pipeline(gr.rows[gr.best].spec, dev, cfg.transform, keys, 1);
        } catch (const Error& e) {
          errs[k] = item + ": " + e.what();
        }
      });
      selected["per_item"] = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < dev_items.size(); ++k) {
        if (fitted[k]) {
          bundle.entries.push_back({dev_items[k].first, std::move(*fitted[k])});
          selected["per_item"].push_back(choice[k]);
        } else {
          failures.push_back(errs[k]);
        }
      }
    }

    MethodResult m;
    if (!bundle.entries.empty()) {
      m = evaluate_bundle(bundle, prep, cfg.transform, &res.forecasts);
    } else {
      m.method = bundle.method;
      m.mode = to_string(cfg.mode);
      m.transform = to_string(cfg.transform);
      m.agg = aggregate({}, res.report.slots);
    }
    m.selected = std::move(selected);
    m.failures.insert(m.failures.begin(), failures.begin(), failures.end());
    res.report.methods.push_back(std::move(m));
    if (!bundle.entries.empty()) res.bundles.push_back(std::move(bundle));
  }
  if (cfg.baseline) res.report.methods.push_back(naive_baseline(prep, to_string(cfg.mode), &res.forecasts));

  std::size_t dev_rows = 0, holdout_rows = 0, dropped = 0;
  for (const auto& [item, c] : prep.split.counts) {
    dev_rows += c.dev;
    holdout_rows += c.holdout;
    dropped += c.dropped;
  }
  auto& md = res.report.metadata;
  md["seed"] = cfg.seed;
  md["mode"] = to_string(cfg.mode);
  md["transform"] = to_string(cfg.transform);
  md["difference"] = cfg.difference;
  md["horizon"] = prep.cube.horizon();
  md["lags"] = cfg.lags;
  md["folds"] = cfg.folds;
  md["cv_scheme"] = to_string(cfg.cv_scheme);
  md["dev_periods"] = cfg.dev_periods;
  md["holdout_periods"] = cfg.holdout_periods;
  md["items"] = prep.cube.item_count();
  md["items_excluded"] = prep.split.excluded;
  md["dev_rows"] = dev_rows;
  md["holdout_rows"] = holdout_rows;
  md["dropped_rows"] = dropped;
  md["holdout_items"] = detail::items_with_rows(prep.split.holdout).size();
  return res;
}

}  // namespace btof
