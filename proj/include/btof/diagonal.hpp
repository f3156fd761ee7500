#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <tuple>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "btof/error.hpp"
#include "btof/log.hpp"
#include "btof/orderbook.hpp"

namespace btof {

// Net bookings: delta[t][h] = q[t][h] - q[t][h+1], with q[t][H] taken as 0.
inline DemandCube difference(const DemandCube& gross) {
  if (gross.semantics() != Semantics::gross) throw Error("already differenced");
  DemandCube net = gross.with_semantics(Semantics::net);
  const int H = gross.horizon();
  for (std::size_t i = 0; i < gross.item_count(); ++i)
    for (auto t = gross.first_period(); t <= gross.last_period(); ++t)
      for (int h = 0; h + 1 < H; ++h) net.at(i, t, h) = gross.at(i, t, h) - gross.at(i, t, h + 1);
  return net;
}

// Suffix sums over delivery dates. Inverse of difference(); negative cells in
// the result are reported through DemandCube::negative_cells().
inline DemandCube accumulate(const DemandCube& net) {
  DemandCube gross = net.with_semantics(Semantics::gross);
  const int H = net.horizon();
  for (std::size_t i = 0; i < net.item_count(); ++i)
    for (auto t = net.first_period(); t <= net.last_period(); ++t) {
      std::int64_t run = 0;
      for (int h = H - 1; h >= 0; --h) {
        run += net.at(i, t, h);
        gross.at(i, t, h) = run;
      }
    }
  if (auto neg = gross.negative_cells(); neg > 0)
    log_warning("accumulate produced " + std::to_string(neg) + " negative gross cells");
  return gross;
}

// A slot of a frontier vector holds q_{t+offset}^{delivery_date}.
struct Slot {
  int offset = 0;
  int delivery_date = 0;

  // Period at which the slot's value is revealed, relative to the frontier.
  int revealed_offset() const { return offset - delivery_date; }
  friend bool operator==(const Slot&, const Slot&) = default;
};

// Slot order of the t-frontier, for H delivery dates and L lagged rows.
//
//   x: rows h = 0..H-1 of the current triangle, columns j = h..H-1, then the
//      full rows q_{t-1}, ..., q_{t-L}.
//   y: rows p = 1..H, columns j = 0..p-1.
//
// For H = 4 this is x_{t0}..x_{t9} / y_{t0}..y_{t9}, row-major over the order
// book drawn with periods down and delivery dates across.
struct FrontierLayout {
  int horizon = 0;
  int lags = 0;
  std::vector<Slot> x;
  std::vector<Slot> y;

  static FrontierLayout make(int horizon, int lags) {
    if (horizon < 1) throw Error("horizon must be >= 1");
    if (lags < 0) throw Error("lags must be >= 0");
    FrontierLayout l;
    l.horizon = horizon;
    l.lags = lags;
    for (int h = 0; h < horizon; ++h)
      for (int j = h; j < horizon; ++j) l.x.push_back({h, j});
    for (int lag = 1; lag <= lags; ++lag)
      for (int j = 0; j < horizon; ++j) l.x.push_back({-lag, j});
    for (int p = 1; p <= horizon; ++p)
      for (int j = 0; j < p; ++j) l.y.push_back({p, j});
    return l;
  }

  // y index of the main-diagonal target q_{t+p}^{p-1}, p = 1..H.
  static std::size_t diagonal_slot(int p) { return static_cast<std::size_t>(p * (p - 1) / 2 + p - 1); }

  // Index of the x slot holding q_{t+offset}^{delivery_date}, or -1.
  int x_index(int offset, int delivery_date) const {
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k] == Slot{offset, delivery_date}) return static_cast<int>(k);
    return -1;
  }
  int y_index(int offset, int delivery_date) const {
    for (std::size_t k = 0; k < y.size(); ++k)
      if (y[k] == Slot{offset, delivery_date}) return static_cast<int>(k);
    return -1;
  }

  std::string x_label(std::size_t k) const {
    const Slot& s = x.at(k);
    if (s.offset >= 0)
      return "x" + std::to_string(k) + "_z" + std::to_string(s.offset) + std::to_string(s.delivery_date);
    return "x" + std::to_string(k) + "_lag" + std::to_string(-s.offset) + "_h" +
           std::to_string(s.delivery_date);
  }
  std::string y_label(std::size_t k) const {
    const Slot& s = y.at(k);
    return "y" + std::to_string(k) + "_z" + std::to_string(s.offset) + std::to_string(s.delivery_date);
  }

  friend bool operator==(const FrontierLayout&, const FrontierLayout&) = default;
};

struct FrontierSample {
  std::string item;
  std::int64_t t = 0;
  std::vector<double> x;
  std::vector<double> y;
};

// Frontiers t with first_period + L <= t and t + H <= last_period.
inline std::vector<FrontierSample> build_frontiers(const DemandCube& cube, std::size_t item,
                                                   const FrontierLayout& layout) {
  if (layout.horizon != cube.horizon()) throw Error("layout horizon does not match cube");
  const auto& code = cube.items().at(item);
  const std::int64_t lo = cube.first_period() + layout.lags;
  const std::int64_t hi = cube.last_period() - layout.horizon;
  std::vector<FrontierSample> out;
  if (hi < lo) {
    log_warning("item '" + code + "' has " + std::to_string(cube.periods()) + " periods, fewer than L + H + 1 = " +
                std::to_string(layout.lags + layout.horizon + 1) + "; no frontiers");
    return out;
  }
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (auto t = lo; t <= hi; ++t) {
    FrontierSample s;
    s.item = code;
    s.t = t;
    s.x.reserve(layout.x.size());
    s.y.reserve(layout.y.size());
    for (const Slot& slot : layout.x) s.x.push_back(static_cast<double>(cube.at(item, t + slot.offset, slot.delivery_date)));
    for (const Slot& slot : layout.y) s.y.push_back(static_cast<double>(cube.at(item, t + slot.offset, slot.delivery_date)));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<FrontierSample> build_frontiers(const DemandCube& cube, const std::string& item,
                                                   int lags) {
  return build_frontiers(cube, cube.item_index(item), FrontierLayout::make(cube.horizon(), lags));
}

struct Provenance {
  std::string item;
  std::int64_t t = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Pooled design: one row per (item, t), row order = item order then t.
struct Dataset {
  FrontierLayout layout;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  std::vector<Provenance> rows;
  // Column labels; default to the layout's slot labels.
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  Eigen::Index size() const { return X.rows(); }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset d;
    d.layout = layout;
    d.x_names = x_names;
    d.y_names = y_names;
    d.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    d.Y.resize(static_cast<Eigen::Index>(idx.size()), Y.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      d.X.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
      d.Y.row(static_cast<Eigen::Index>(r)) = Y.row(static_cast<Eigen::Index>(idx[r]));
      d.rows.push_back(rows[idx[r]]);
    }
    return d;
  }
};

using ItemFrontiers = std::vector<std::pair<std::string, std::vector<FrontierSample>>>;

// Pools rows whose x has one value per entry of `x_names` (frontier slots or
// any other feature set) and whose y follows layout.y.
inline Dataset pool_rows(const ItemFrontiers& per_item, const FrontierLayout& layout,
                         std::vector<std::string> x_names) {
  Dataset d;
  d.layout = layout;
  d.x_names = std::move(x_names);
  for (std::size_t k = 0; k < layout.y.size(); ++k) d.y_names.push_back(layout.y_label(k));
  const std::size_t nx = d.x_names.size();
  std::size_t n = 0;
  for (const auto& [item, samples] : per_item) {
    for (const auto& s : samples)
      if (s.x.size() != nx || s.y.size() != layout.y.size())
        throw Error("frontier dimension mismatch for item '" + item + "'");
    n += samples.size();
  }
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nx));
  d.Y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layout.y.size()));
  d.rows.reserve(n);
  Eigen::Index r = 0;
  for (const auto& [item, samples] : per_item)
    for (const auto& s : samples) {
      for (std::size_t k = 0; k < s.x.size(); ++k) d.X(r, static_cast<Eigen::Index>(k)) = s.x[k];
      for (std::size_t k = 0; k < s.y.size(); ++k) d.Y(r, static_cast<Eigen::Index>(k)) = s.y[k];
      d.rows.push_back({item, s.t});
      ++r;
    }
  return d;
}

inline Dataset pool_frontiers(const ItemFrontiers& per_item, const FrontierLayout& layout) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < layout.x.size(); ++k) names.push_back(layout.x_label(k));
  return pool_rows(per_item, layout, std::move(names));
}

inline ItemFrontiers frontiers_for_all(const DemandCube& cube, const FrontierLayout& layout) {
  ItemFrontiers out;
  out.reserve(cube.item_count());
  for (std::size_t i = 0; i < cube.item_count(); ++i)
    out.emplace_back(cube.items()[i], build_frontiers(cube, i, layout));
  return out;
}

// Predictions reassembled per frontier and per order-book cell.
struct ForecastTable {
  struct Frontier {
    std::string item;
    std::int64_t t = 0;
    std::vector<double> yhat;           // layout.y order
    std::vector<double> main_diagonal;  // q^_{t+p}^{p-1}, p = 1..H
  };
  struct Candidate {
    std::int64_t frontier = 0;
    double value = 0.0;
  };
  struct Cell {
    std::string item;
    std::int64_t period = 0;
    int delivery_date = 0;
    std::vector<Candidate> candidates;  // ascending frontier
    // Taken from the latest frontier, which has seen the most pre-orders.
    double point() const { return candidates.back().value; }
    std::int64_t point_frontier() const { return candidates.back().frontier; }
  };

  FrontierLayout layout;
  std::vector<Frontier> frontiers;  // ordered by (item, t)
  std::vector<Cell> cells;          // ordered by (item, period, delivery_date)

  const Cell* cell(const std::string& item, std::int64_t period, int delivery_date) const {
    for (const auto& c : cells)
      if (c.item == item && c.period == period && c.delivery_date == delivery_date) return &c;
    return nullptr;
  }
};

using PredictionMap = std::map<std::pair<std::string, std::int64_t>, std::vector<double>>;

inline ForecastTable assemble_forecast(const FrontierLayout& layout, const PredictionMap& predictions) {
  ForecastTable table;
  table.layout = layout;
  using CellKey = std::tuple<std::string, std::int64_t, int>;
  std::map<CellKey, ForecastTable::Cell> cells;
  for (const auto& [key, yhat] : predictions) {
    const auto& [item, t] = key;
    if (yhat.size() != layout.y.size())
      throw Error("prediction for item '" + item + "' at t=" + std::to_string(t) + " has " +
                  std::to_string(yhat.size()) + " slots, layout expects " + std::to_string(layout.y.size()));
    ForecastTable::Frontier f{item, t, yhat, {}};
    for (int p = 1; p <= layout.horizon; ++p) f.main_diagonal.push_back(yhat[FrontierLayout::diagonal_slot(p)]);
    table.frontiers.push_back(std::move(f));
    for (std::size_t k = 0; k < layout.y.size(); ++k) {
      const Slot& s = layout.y[k];
      auto& cell = cells[CellKey{item, t + s.offset, s.delivery_date}];
      cell.item = item;
      cell.period = t + s.offset;
      cell.delivery_date = s.delivery_date;
      cell.candidates.push_back({t, yhat[k]});  // map iteration is t-ascending per item
    }
  }
  table.cells.reserve(cells.size());
  for (auto& [key, cell] : cells) table.cells.push_back(std::move(cell));
  return table;
}

// Pooled dataset as CSV: item,t,x...,y...
inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "item,t";
  for (const auto& n : d.x_names) out << ',' << n;
  for (const auto& n : d.y_names) out << ',' << n;
  out << '\n';
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    out << csv::quote(d.rows[static_cast<std::size_t>(r)].item) << ',' << d.rows[static_cast<std::size_t>(r)].t;
    for (Eigen::Index c = 0; c < d.X.cols(); ++c) out << ',' << csv::format_double(d.X(r, c));
    for (Eigen::Index c = 0; c < d.Y.cols(); ++c) out << ',' << csv::format_double(d.Y(r, c));
    out << '\n';
  }
}

// Sidecar for write_dataset_csv: slot -> (period offset, delivery date).
inline nlohmann::ordered_json layout_json(const Dataset& d) {
  nlohmann::ordered_json j;
  j["horizon"] = d.layout.horizon;
  j["lags"] = d.layout.lags;
  auto slots = [](const std::vector<std::string>& names, const std::vector<Slot>& s) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < names.size(); ++k) {
      nlohmann::ordered_json e{{"column", names[k]}, {"index", k}};
      if (k < s.size()) {
        e["period_offset"] = s[k].offset;
        e["delivery_date"] = s[k].delivery_date;
      }
      arr.push_back(e);
    }
    return arr;
  };
  j["x"] = slots(d.x_names, d.layout.x);
  j["y"] = slots(d.y_names, d.layout.y);
  return j;
}

}  // namespace btof
