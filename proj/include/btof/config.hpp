#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "btof/csv.hpp"
#include "btof/error.hpp"
#include "btof/models/model.hpp"
#include "btof/pipeline.hpp"

namespace btof {

// Settings of a `train` run. Read from a plain `key = value` file (TOML
// subset: '#' comments, optional quotes, comma lists with optional [ ]).
// docs/formats.md lists every key.
struct TrainConfig {
  std::string input;
  std::string out = "btof-out";
  Semantics semantics = Semantics::gross;
  int horizon = 4;
  double min_nonzero_frac = 0.6;
  int threads = 1;
  std::vector<std::string> families{"ridge", "lasso", "knn", "tree", "random_forest", "gbt", "mlp"};
  ExperimentConfig experiment;

  // Per-family hyperparameter value lists, expanded as a cartesian product in
  // key order (earlier keys vary slowest).
  std::vector<std::pair<std::string, std::vector<std::string>>> grid{
      {"ridge.lambda", {"0.01", "0.1", "1", "10"}},
      {"lasso.lambda", {"0.01", "0.1", "1", "10"}},
      {"knn.k", {"1", "3", "5", "10"}},
      {"knn.weighting", {"uniform"}},
      {"tree.max_depth", {"2", "3", "5"}},
      {"tree.min_leaf", {"1"}},
      {"random_forest.n_estimators", {"100", "500"}},
      {"random_forest.max_depth", {"2", "3", "5"}},
      {"random_forest.min_leaf", {"1"}},
      {"random_forest.feature_frac", {"0.333"}},
      {"gbt.n_estimators", {"100", "500"}},
      {"gbt.learning_rate", {"0.05", "0.1"}},
      {"gbt.max_depth", {"2", "3", "5"}},
      {"gbt.min_leaf", {"1"}},
      {"mlp.hidden", {"80x20"}},
      {"mlp.epochs", {"50", "200"}},
      {"mlp.batch_size", {"32"}},
      {"mlp.step_size", {"0.01"}},
      {"mlp.momentum", {"0.9"}},
  };

  std::vector<std::string>* grid_values(const std::string& key) {
    for (auto& [k, v] : grid)
      if (k == key) return &v;
    return nullptr;
  }
  const std::vector<std::string>* grid_values(const std::string& key) const {
    for (const auto& [k, v] : grid)
      if (k == key) return &v;
    return nullptr;
  }

  // Canonical text of every setting that can change results, one per line in
  // fixed order. Paths and the worker cap are left out; its hash identifies
  // the run in report metadata.
  std::string canonical() const {
    std::ostringstream os;
    const auto& e = experiment;
    os << "semantics = " << to_string(semantics) << '\n'
       << "horizon = " << horizon << '\n'
       << "min_nonzero_frac = " << csv::format_double(min_nonzero_frac) << '\n'
       << "difference = " << (e.difference ? "true" : "false") << '\n'
       << "mode = " << to_string(e.mode) << '\n'
       << "transform = " << to_string(e.transform) << '\n'
       << "lags = " << e.lags << '\n'
       << "feature_lags = " << e.feature_lags << '\n'
       << "dev_periods = " << e.dev_periods << '\n'
       << "holdout_periods = " << e.holdout_periods << '\n'
       << "folds = " << e.folds << '\n'
       << "cv_scheme = " << to_string(e.cv_scheme) << '\n'
       << "baseline = " << (e.baseline ? "true" : "false") << '\n'
       << "seed = " << e.seed << '\n'
       << "models = " << join(families) << '\n';
    for (const auto& [k, v] : grid) os << k << " = " << join(v) << '\n';
    return os.str();
  }

  // Full listing, loadable by parse_train_config.
  std::string defaults_text() const {
    return "input = " + input + "\nout = " + out + "\nthreads = " + std::to_string(threads) + '\n' + canonical();
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  }
};

namespace detail {

inline std::string unquote(std::string_view s) {
  s = csv::trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string> split_list(std::string_view s) {
  s = csv::trim(s);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  for (const auto& f : csv::split_line(s)) {
    auto v = unquote(f);
    if (!v.empty()) out.push_back(std::move(v));
  }
  return out;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  if (!csv::parse_int(v, out)) throw Error("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}
inline double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  if (!csv::parse_double(v, out)) throw Error("config: " + key + " expects a number, got '" + v + "'");
  return out;
}
inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: " + key + " expects true|false, got '" + v + "'");
}

}  // namespace detail

inline TrainConfig parse_train_config(std::istream& in) {
  using namespace detail;
  TrainConfig c;
  auto& e = c.experiment;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const auto body = csv::trim(line);
    if (body.empty() || body.front() == '[') continue;  // blank or TOML table header
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(csv::trim(body.substr(0, eq)));
    const std::string raw(csv::trim(body.substr(eq + 1)));
    const std::string v = unquote(raw);
    try {
      if (key == "input") c.input = v;
      else if (key == "out") c.out = v;
      else if (key == "semantics") c.semantics = parse_semantics(v);
      else if (key == "horizon") c.horizon = static_cast<int>(to_int(key, v));
      else if (key == "min_nonzero_frac") c.min_nonzero_frac = to_double(key, v);
      else if (key == "threads") c.threads = static_cast<int>(to_int(key, v));
      else if (key == "difference") e.difference = to_bool(key, v);
      else if (key == "mode") e.mode = parse_mode(v);
      else if (key == "transform") e.transform = parse_transform(v);
      else if (key == "lags") e.lags = static_cast<int>(to_int(key, v));
      else if (key == "feature_lags") e.feature_lags = static_cast<int>(to_int(key, v));
      else if (key == "dev_periods") e.dev_periods = static_cast<int>(to_int(key, v));
      else if (key == "holdout_periods") e.holdout_periods = static_cast<int>(to_int(key, v));
      else if (key == "folds") e.folds = static_cast<int>(to_int(key, v));
      else if (key == "cv_scheme") e.cv_scheme = parse_cv_scheme(v);
      else if (key == "baseline") e.baseline = to_bool(key, v);
      else if (key == "seed") e.seed = static_cast<std::uint64_t>(to_int(key, v));
      else if (key == "models") {
        c.families = split_list(raw);
        for (const auto& f : c.families) models::parse_family(f);
      } else if (auto* values = c.grid_values(key)) {
        *values = split_list(raw);
        if (values->empty()) throw Error("config: " + key + " needs at least one value");
      } else {
        throw Error("config: unknown key '" + key + "'");
      }
    } catch (const Error& err) {
      throw Error("config line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return c;
}

// Expands the per-family value lists into concrete specs; every spec carries
// the experiment seed.
inline std::vector<models::ModelSpec> expand_grid(const TrainConfig& c) {
  using namespace detail;
  std::vector<models::ModelSpec> out;
  for (const auto& fam_name : c.families) {
    const models::Family fam = models::parse_family(fam_name);
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    const std::string prefix = fam_name + ".";
    for (const auto& [k, v] : c.grid)
      if (k.starts_with(prefix)) axes.emplace_back(k.substr(prefix.size()), v);
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
      models::ModelSpec s;
      s.family = fam;
      s.seed = c.experiment.seed;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const std::string& name = axes[a].first;
        const std::string& v = axes[a].second[idx[a]];
        const std::string key = prefix + name;
        if (name == "lambda") s.lambda = to_double(key, v);
        else if (name == "k") s.k = static_cast<int>(to_int(key, v));
        else if (name == "weighting") s.weighting = models::parse_weighting(v);
        else if (name == "max_depth") s.max_depth = static_cast<int>(to_int(key, v));
        else if (name == "min_leaf") s.min_leaf = static_cast<int>(to_int(key, v));
        else if (name == "n_estimators") s.n_estimators = static_cast<int>(to_int(key, v));
        else if (name == "feature_frac") s.feature_frac = to_double(key, v);
        else if (name == "learning_rate") s.learning_rate = to_double(key, v);
        else if (name == "epochs") s.epochs = static_cast<int>(to_int(key, v));
        else if (name == "batch_size") s.batch_size = static_cast<int>(to_int(key, v));
        else if (name == "step_size") s.step_size = to_double(key, v);
        else if (name == "momentum") s.momentum = to_double(key, v);
        else if (name == "hidden") {
          s.hidden.clear();
          std::string part;
          std::istringstream hs(v);
          while (std::getline(hs, part, 'x'))
            if (!part.empty()) s.hidden.push_back(static_cast<int>(to_int(key, part)));
        } else {
          throw Error("config: unsupported grid key '" + key + "'");
        }
      }
      s.validate();
      out.push_back(s);
      // odometer, last axis fastest
      bool done = true;
      for (std::size_t a = axes.size(); a-- > 0;) {
        if (++idx[a] < axes[a].second.size()) {
          done = false;
          break;
        }
        idx[a] = 0;
      }
      if (done) break;
    }
  }
  return out;
}

}  // namespace btof
