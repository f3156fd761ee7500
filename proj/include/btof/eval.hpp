#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "btof/csv.hpp"
#include "btof/error.hpp"
#include "btof/log.hpp"

namespace btof {

// Round half away from zero, then clamp at zero.
inline std::int64_t postprocess_forecast(double v, std::string_view context = {}) {
  if (!std::isfinite(v))
    throw Error("non-finite prediction" + (context.empty() ? std::string() : " (" + std::string(context) + ")"));
  const double r = std::round(v);
  return r <= 0.0 ? 0 : static_cast<std::int64_t>(r);
}

// 2|A - F| / (|A| + |F|) on the [0, 2] scale; 0/0 is a perfect forecast.
inline double smape_point(double actual, double forecast) {
  const double denom = std::abs(actual) + std::abs(forecast);
  if (denom == 0.0) return 0.0;
  return 2.0 * std::abs(actual - forecast) / denom;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One s_jit value: target slot j, item i, forecast frontier t.
struct SmapeEntry {
  std::size_t slot = 0;
  std::string item;
  std::int64_t t = 0;
  double value = 0.0;
};

// Two-stage means: s_ji over an item's test frontiers, then s_j over items.
struct SmapeAggregates {
  std::vector<std::string> items;        // items with at least one entry, first-seen order
  std::vector<std::vector<double>> s_ji;  // [slot][item]
  std::vector<double> s_j;
  std::vector<std::string> excluded;  // items with an empty test set

  double overall() const {
    if (s_j.empty()) return std::nan("");
    return std::accumulate(s_j.begin(), s_j.end(), 0.0) / static_cast<double>(s_j.size());
  }
  double median_item_smape() const {
    std::vector<double> all;
    for (const auto& row : s_ji) all.insert(all.end(), row.begin(), row.end());
    return median(std::move(all));
  }
};

// `expected_items`, when given, lists every item that should have a test set;
// those without entries are excluded with a warning.
inline SmapeAggregates aggregate(const std::vector<SmapeEntry>& entries, std::size_t slots,
                                 const std::vector<std::string>& expected_items = {}) {
  SmapeAggregates agg;
  std::map<std::string, std::size_t> pos;
  for (const auto& e : entries)
    if (pos.emplace(e.item, agg.items.size()).second) agg.items.push_back(e.item);
  for (const auto& item : expected_items)
    if (!pos.count(item)) {
      agg.excluded.push_back(item);
      log_warning("item '" + item + "' has an empty test set; excluded from SMAPE aggregation");
    }
  const std::size_t m = agg.items.size();
  std::vector<std::vector<double>> sum(slots, std::vector<double>(m, 0.0));
  std::vector<std::vector<std::size_t>> count(slots, std::vector<std::size_t>(m, 0));
  for (const auto& e : entries) {
    if (e.slot >= slots) throw Error("SMAPE entry slot " + std::to_string(e.slot) + " out of range");
    const std::size_t i = pos.at(e.item);
    sum[e.slot][i] += e.value;
    ++count[e.slot][i];
  }
  agg.s_ji.assign(slots, std::vector<double>(m, 0.0));
  agg.s_j.assign(slots, 0.0);
  for (std::size_t j = 0; j < slots; ++j) {
    double item_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (count[j][i] == 0) throw Error("SMAPE tensor incomplete: item '" + agg.items[i] + "' lacks slot " + std::to_string(j));
      agg.s_ji[j][i] = sum[j][i] / static_cast<double>(count[j][i]);
      item_sum += agg.s_ji[j][i];
    }
    agg.s_j[j] = m ? item_sum / static_cast<double>(m) : std::nan("");
  }
  return agg;
}

// One evaluated method (a model family or the naive baseline) under one mode
// and target transform.
struct MethodResult {
  std::string method;
  std::string mode;
  std::string transform;
  bool baseline = false;
  nlohmann::ordered_json selected;  // chosen spec(s) and CV table
  std::vector<SmapeEntry> entries;
  SmapeAggregates agg;
  std::vector<std::string> failures;  // per-item failures recorded during the run
};

struct EvalReport {
  std::vector<MethodResult> methods;
  std::size_t slots = 0;
  nlohmann::ordered_json metadata;

  std::vector<double> method_scores(bool df_only) const {
    std::vector<double> out;
    for (const auto& m : methods)
      if (!m.baseline && !m.agg.s_j.empty() && (!df_only || m.mode.starts_with("df_"))) out.push_back(m.agg.overall());
    return out;
  }
};

// Published medians for the real dataset, printed next to ours for
// orientation only.
struct ReferenceRow {
  const char* name;
  double published;
  bool df_only;
  std::size_t top;  // 0 = all methods
};
inline constexpr ReferenceRow kReferenceRows[] = {
    {"median_all_methods", 0.42, false, 0},
    {"median_df_methods", 0.43, true, 0},
    {"median_top10_all", 0.31, false, 10},
    {"median_top10_df", 0.37, true, 10},
};

inline nlohmann::ordered_json reference_comparison(const EvalReport& r) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& ref : kReferenceRows) {
    auto scores = r.method_scores(ref.df_only);
    std::sort(scores.begin(), scores.end());
    if (ref.top && scores.size() > ref.top) scores.resize(ref.top);
    nlohmann::ordered_json row{{"name", ref.name}, {"published", ref.published}, {"methods", scores.size()}};
    if (scores.empty()) {
      row["observed"] = nullptr;
      row["deviation"] = nullptr;
    } else {
      const double m = median(scores);
      row["observed"] = m;
      row["deviation"] = m - ref.published;
    }
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "btof-report";
  j["version"] = 1;
  j["metadata"] = r.metadata;
  auto methods = nlohmann::ordered_json::array();
  for (const auto& m : r.methods) {
    nlohmann::ordered_json mj;
    mj["method"] = m.method;
    mj["mode"] = m.mode;
    mj["transform"] = m.transform;
    mj["baseline"] = m.baseline;
    mj["smape"] = m.agg.s_j.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m.agg.overall());
    mj["smape_percent"] = m.agg.s_j.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(100.0 * m.agg.overall());
    mj["median_smape"] = m.agg.s_j.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m.agg.median_item_smape());
    mj["s_j"] = m.agg.s_j;
    mj["items_evaluated"] = m.agg.items.size();
    mj["items_excluded"] = m.agg.excluded;
    mj["failures"] = m.failures;
    mj["selected"] = m.selected;
    methods.push_back(mj);
  }
  j["methods"] = methods;
  const auto all = r.method_scores(false), df = r.method_scores(true);
  j["median_smape_all_methods"] = all.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(median(all));
  j["median_smape_df_methods"] = df.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(median(df));
  j["reference_comparison"] = reference_comparison(r);
  return j;
}

// scores.csv: per-item s_ji rows.
inline void write_scores_csv(std::ostream& out, const EvalReport& r) {
  out << "method,mode,transform,slot_j,item,smape\n";
  for (const auto& m : r.methods)
    for (std::size_t j = 0; j < m.agg.s_ji.size(); ++j)
      for (std::size_t i = 0; i < m.agg.items.size(); ++i)
        out << m.method << ',' << m.mode << ',' << m.transform << ',' << j << ',' << csv::quote(m.agg.items[i]) << ','
            << csv::format_double(m.agg.s_ji[j][i]) << '\n';
}

// scores_jit.csv: the full s_jit tensor; enough to regenerate every aggregate.
inline void write_scores_jit_csv(std::ostream& out, const EvalReport& r) {
  out << "method,mode,transform,slot_j,item,t,smape\n";
  for (const auto& m : r.methods)
    for (const auto& e : m.entries)
      out << m.method << ',' << m.mode << ',' << m.transform << ',' << e.slot << ',' << csv::quote(e.item) << ','
          << e.t << ',' << csv::format_double(e.value) << '\n';
}

inline void write_summary_csv(std::ostream& out, const EvalReport& r) {
  out << "method,mode,transform,median_smape";
  for (std::size_t j = 0; j < r.slots; ++j) out << ",smape_slot" << j;
  out << '\n';
  for (const auto& m : r.methods) {
    out << m.method << ',' << m.mode << ',' << m.transform << ','
        << (m.agg.s_j.empty() ? std::string("NA") : csv::format_double(m.agg.median_item_smape()));
    for (std::size_t j = 0; j < r.slots; ++j)
      out << ',' << (j < m.agg.s_j.size() ? csv::format_double(m.agg.s_j[j]) : std::string("NA"));
    out << '\n';
  }
}

// Rebuilds a report from scores_jit.csv. Method rows keep file order; the
// baseline flag is restored for the "naive" method.
inline EvalReport read_scores_jit_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("scores file is empty");
  const auto header = csv::split_line(line);
  const std::vector<std::string> expected{"method", "mode", "transform", "slot_j", "item", "t", "smape"};
  if (header != expected) throw Error("scores file header must be method,mode,transform,slot_j,item,t,smape");
  EvalReport r;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != expected.size()) throw Error("line " + std::to_string(line_no) + ": malformed scores row");
    std::int64_t slot = 0, t = 0;
    double v = 0;
    if (!csv::parse_int(f[3], slot) || slot < 0 || !csv::parse_int(f[5], t) || !csv::parse_double(f[6], v))
      throw Error("line " + std::to_string(line_no) + ": malformed scores row");
    auto key = std::make_tuple(f[0], f[1], f[2]);
    auto [it, fresh] = index.emplace(key, r.methods.size());
    if (fresh) {
      MethodResult m;
      m.method = f[0];
      m.mode = f[1];
      m.transform = f[2];
      m.baseline = f[0] == "naive";
      r.methods.push_back(std::move(m));
    }
    r.methods[it->second].entries.push_back({static_cast<std::size_t>(slot), f[4], t, v});
    r.slots = std::max(r.slots, static_cast<std::size_t>(slot) + 1);
  }
  for (auto& m : r.methods) m.agg = aggregate(m.entries, r.slots);
  return r;
}

}  // namespace btof
