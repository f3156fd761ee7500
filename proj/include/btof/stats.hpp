#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "btof/csv.hpp"
#include "btof/diagonal.hpp"
#include "btof/error.hpp"
#include "btof/parallel.hpp"

namespace btof {

// 1-based mid-ranks: a run of ties spanning ranks [a, b] gets (a + b) / 2.
inline std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// Spearman rank correlation with mid-rank ties. nullopt when either input is
// constant (the coefficient is undefined there).
inline std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("spearman: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 2) throw Error("spearman: need at least 2 observations");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

// Rank correlations between every pair of pooled frontier columns (x slots,
// then y slots). Undefined entries (constant columns) are nullopt.
struct CorrTable {
  std::vector<std::string> labels;
  std::vector<Slot> slots;
  std::vector<std::optional<double>> entries;  // row-major, labels.size() squared

  std::size_t size() const { return labels.size(); }
  std::optional<double> at(std::size_t r, std::size_t c) const { return entries.at(r * size() + c); }

  std::optional<double> between(std::string_view a, std::string_view b) const {
    auto find = [&](std::string_view l) {
      auto it = std::find(labels.begin(), labels.end(), l);
      if (it == labels.end()) throw Error("no column '" + std::string(l) + "' in correlation table");
      return static_cast<std::size_t>(it - labels.begin());
    };
    return at(find(a), find(b));
  }

  std::vector<std::string> undefined_columns() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (!at(i, i)) out.push_back(labels[i]);
    return out;
  }
};

inline CorrTable correlation_table(const Dataset& d, std::size_t threads = 1) {
  if (d.size() < 2) throw Error("correlation table needs at least 2 rows");
  CorrTable table;
  table.labels = d.x_names;
  table.labels.insert(table.labels.end(), d.y_names.begin(), d.y_names.end());
  table.slots = d.layout.x;
  table.slots.insert(table.slots.end(), d.layout.y.begin(), d.layout.y.end());
  const std::size_t m = table.labels.size();

  std::vector<std::vector<double>> ranks(m);
  std::vector<bool> constant(m);
  for (std::size_t c = 0; c < m; ++c) {
    const Eigen::VectorXd col = c < static_cast<std::size_t>(d.X.cols())
                                    ? Eigen::VectorXd(d.X.col(static_cast<Eigen::Index>(c)))
                                    : Eigen::VectorXd(d.Y.col(static_cast<Eigen::Index>(c - d.X.cols())));
    ranks[c] = average_ranks(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    constant[c] = col.maxCoeff() == col.minCoeff();
  }
  table.entries.assign(m * m, std::nullopt);
  parallel_for(m, threads, [&](std::size_t r) {
    for (std::size_t c = r; c < m; ++c) {
      if (constant[r] || constant[c]) continue;
      const auto v = r == c ? std::optional<double>(1.0) : pearson(ranks[r], ranks[c]);
      table.entries[r * m + c] = v;
      table.entries[c * m + r] = v;
    }
  });
  return table;
}

// Square CSV with slot labels as header; undefined entries are written as NA.
inline void write_corr_csv(std::ostream& out, const CorrTable& t) {
  out << "slot";
  for (const auto& l : t.labels) out << ',' << l;
  out << '\n';
  for (std::size_t r = 0; r < t.size(); ++r) {
    out << t.labels[r];
    for (std::size_t c = 0; c < t.size(); ++c) {
      const auto v = t.at(r, c);
      out << ',' << (v ? csv::format_double(*v) : std::string("NA"));
    }
    out << '\n';
  }
}

}  // namespace btof
