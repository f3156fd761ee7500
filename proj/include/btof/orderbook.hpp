#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "btof/csv.hpp"
#include "btof/error.hpp"

namespace btof {

// One row of an order-book export: `quantity` units for fulfillment at the end
// of `period`, booked `delivery_date` periods in advance.
struct OrderRecord {
  std::string item_code;
  std::int64_t period = 0;
  int delivery_date = 0;
  std::int64_t quantity = 0;

  friend bool operator==(const OrderRecord&, const OrderRecord&) = default;
};

// Header names for the four logical columns. Extra columns are ignored.
struct CsvSchema {
  std::string item_code = "item_code";
  std::string period = "period";
  std::string delivery_date = "delivery_date";
  std::string quantity = "quantity";
  // Declared calendar range; records outside it are rejected.
  std::optional<std::int64_t> min_period;
  std::optional<std::int64_t> max_period;
};

enum class Semantics { gross, net };

inline const char* to_string(Semantics s) { return s == Semantics::gross ? "gross" : "net"; }

inline Semantics parse_semantics(std::string_view s) {
  if (s == "gross") return Semantics::gross;
  if (s == "net") return Semantics::net;
  throw Error("unknown semantics '" + std::string(s) + "' (expected gross|net)");
}

inline std::vector<OrderRecord> parse_orders(std::istream& in, int horizon,
                                             const CsvSchema& schema = {}) {
  if (horizon < 1) throw Error("horizon must be >= 1");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!csv::trim(line).empty()) {
      header = csv::split_line(line);
      break;
    }
  }
  if (header.empty()) throw Error("missing header row");
  if (line_no == 1 && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (csv::trim(header[i]) == name) return i;
    throw Error("header is missing column '" + name + "'");
  };
  const std::size_t c_item = column(schema.item_code);
  const std::size_t c_period = column(schema.period);
  const std::size_t c_h = column(schema.delivery_date);
  const std::size_t c_qty = column(schema.quantity);
  const std::size_t needed = std::max({c_item, c_period, c_h, c_qty}) + 1;

  std::vector<OrderRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_line(line);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() < needed)
      throw Error(where + "malformed row, expected at least " + std::to_string(needed) +
                  " fields, got " + std::to_string(fields.size()));
    OrderRecord r;
    r.item_code = std::string(csv::trim(fields[c_item]));
    if (r.item_code.empty()) throw Error(where + "empty item_code");
    std::int64_t h = 0;
    if (!csv::parse_int(fields[c_period], r.period))
      throw Error(where + "period '" + fields[c_period] + "' is not an integer");
    if (!csv::parse_int(fields[c_h], h))
      throw Error(where + "delivery_date '" + fields[c_h] + "' is not an integer");
    if (!csv::parse_int(fields[c_qty], r.quantity))
      throw Error(where + "quantity '" + fields[c_qty] + "' is not an integer");
    if (h < 0 || h >= horizon)
      throw Error(where + "delivery_date " + std::to_string(h) + " out of range [0, " +
                  std::to_string(horizon - 1) + "]");
    if (r.quantity < 0)
      throw Error(where + "negative quantity " + std::to_string(r.quantity));
    if ((schema.min_period && r.period < *schema.min_period) ||
        (schema.max_period && r.period > *schema.max_period))
      throw Error(where + "period " + std::to_string(r.period) +
                  " outside the declared calendar range");
    r.delivery_date = static_cast<int>(h);
    out.push_back(std::move(r));
  }
  return out;
}

// Dense per-item order book q[item][t][h]. Absent cells are zero. Immutable
// once built; share freely across readers.
class DemandCube {
 public:
  DemandCube() = default;

  DemandCube(std::vector<std::string> items, std::int64_t first_period, std::int64_t last_period,
             int horizon, Semantics semantics)
      : items_(std::move(items)),
        first_period_(first_period),
        last_period_(last_period),
        horizon_(horizon),
        semantics_(semantics) {
    if (horizon_ < 1) throw Error("horizon must be >= 1");
    if (last_period_ < first_period_) throw Error("empty period range");
    values_.assign(items_.size() * static_cast<std::size_t>(periods()) * horizon_, 0);
    for (std::size_t i = 0; i < items_.size(); ++i) index_.emplace(items_[i], i);
    if (index_.size() != items_.size()) throw Error("duplicate item codes in cube");
  }

  const std::vector<std::string>& items() const { return items_; }
  std::size_t item_count() const { return items_.size(); }
  std::int64_t first_period() const { return first_period_; }
  std::int64_t last_period() const { return last_period_; }
  std::int64_t periods() const { return last_period_ - first_period_ + 1; }
  int horizon() const { return horizon_; }
  Semantics semantics() const { return semantics_; }

  std::optional<std::size_t> find(const std::string& item) const {
    auto it = index_.find(item);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t item_index(const std::string& item) const {
    auto idx = find(item);
    if (!idx) throw Error("item '" + item + "' not in cube");
    return *idx;
  }

  bool contains(std::int64_t t) const { return t >= first_period_ && t <= last_period_; }

  // Absolute period t, delivery date h.
  std::int64_t at(std::size_t item, std::int64_t t, int h) const { return values_[offset(item, t, h)]; }
  std::int64_t& at(std::size_t item, std::int64_t t, int h) { return values_[offset(item, t, h)]; }

  // One item's block, row-major [t - first_period][h].
  std::span<const std::int64_t> block(std::size_t item) const {
    const std::size_t n = static_cast<std::size_t>(periods()) * horizon_;
    return {values_.data() + item * n, n};
  }

  std::span<const std::int64_t> values() const { return values_; }

  // Cells with q[t][h] < q[t][h+1]; only meaningful for gross cubes.
  std::size_t monotonicity_violations() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < items_.size(); ++i)
      for (auto t = first_period_; t <= last_period_; ++t)
        for (int h = 0; h + 1 < horizon_; ++h)
          if (at(i, t, h) < at(i, t, h + 1)) ++count;
    return count;
  }

  std::size_t negative_cells() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](std::int64_t v) { return v < 0; }));
  }

  // Number of duplicate (item, t, h) rows that were summed during build_cube.
  std::size_t merged_duplicates = 0;

  friend bool operator==(const DemandCube& a, const DemandCube& b) {
    return a.items_ == b.items_ && a.first_period_ == b.first_period_ &&
           a.last_period_ == b.last_period_ && a.horizon_ == b.horizon_ &&
           a.semantics_ == b.semantics_ && a.values_ == b.values_;
  }

  DemandCube with_semantics(Semantics s) const {
    DemandCube c = *this;
    c.semantics_ = s;
    return c;
  }

 private:
  std::size_t offset(std::size_t item, std::int64_t t, int h) const {
    if (item >= items_.size() || !contains(t) || h < 0 || h >= horizon_)
      throw Error("cube index out of range (item " + std::to_string(item) + ", period " +
                  std::to_string(t) + ", delivery_date " + std::to_string(h) + ")");
    return (item * static_cast<std::size_t>(periods()) + static_cast<std::size_t>(t - first_period_)) *
               horizon_ +
           static_cast<std::size_t>(h);
  }

  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t first_period_ = 0;
  std::int64_t last_period_ = -1;
  int horizon_ = 0;
  Semantics semantics_ = Semantics::gross;
  std::vector<std::int64_t> values_;
};

// Items keep their order of first appearance in `records`, so a pure rename of
// item codes never reorders the cube. Period range is [min, max] of records
// unless an explicit range is given.
inline DemandCube build_cube(std::span<const OrderRecord> records, int horizon,
                             Semantics semantics,
                             std::optional<std::pair<std::int64_t, std::int64_t>> range = {}) {
  if (records.empty()) throw Error("no order records");
  std::vector<std::string> items;
  std::unordered_map<std::string, std::size_t> seen;
  std::int64_t lo = records.front().period, hi = records.front().period;
  for (const auto& r : records) {
    if (r.delivery_date < 0 || r.delivery_date >= horizon)
      throw Error("delivery_date " + std::to_string(r.delivery_date) + " out of range");
    if (r.quantity < 0) throw Error("negative quantity for item '" + r.item_code + "'");
    if (seen.emplace(r.item_code, items.size()).second) items.push_back(r.item_code);
    lo = std::min(lo, r.period);
    hi = std::max(hi, r.period);
  }
  if (range) {
    if (lo < range->first || hi > range->second) throw Error("records fall outside the requested period range");
    lo = range->first;
    hi = range->second;
  }
  DemandCube cube(std::move(items), lo, hi, horizon, semantics);
  std::vector<bool> filled(cube.values().size(), false);
  const std::size_t per_item = static_cast<std::size_t>(cube.periods()) * horizon;
  std::size_t duplicates = 0;
  for (const auto& r : records) {
    const std::size_t i = seen.at(r.item_code);
    const std::size_t flat = i * per_item + static_cast<std::size_t>(r.period - lo) * horizon +
                             static_cast<std::size_t>(r.delivery_date);
    if (filled[flat]) ++duplicates;
    filled[flat] = true;
    cube.at(i, r.period, r.delivery_date) += r.quantity;
  }
  cube.merged_duplicates = duplicates;
  return cube;
}

// A period counts as non-zero when any delivery date of that period is.
inline std::int64_t nonzero_periods(const DemandCube& cube, std::size_t item) {
  std::int64_t n = 0;
  for (auto t = cube.first_period(); t <= cube.last_period(); ++t) {
    bool any = false;
    for (int h = 0; h < cube.horizon() && !any; ++h) any = cube.at(item, t, h) != 0;
    n += any ? 1 : 0;
  }
  return n;
}

inline DemandCube select_items(const DemandCube& cube, std::span<const std::size_t> keep) {
  std::vector<std::string> names;
  names.reserve(keep.size());
  for (auto i : keep) names.push_back(cube.items().at(i));
  DemandCube out(std::move(names), cube.first_period(), cube.last_period(), cube.horizon(),
                 cube.semantics());
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (auto t = cube.first_period(); t <= cube.last_period(); ++t)
      for (int h = 0; h < cube.horizon(); ++h) out.at(k, t, h) = cube.at(keep[k], t, h);
  return out;
}

inline DemandCube filter_items(const DemandCube& cube, double min_nonzero_frac) {
  if (!(min_nonzero_frac >= 0.0 && min_nonzero_frac <= 1.0))
    throw Error("min_nonzero_frac must lie in [0, 1]");
  std::vector<std::size_t> keep;
  const double periods = static_cast<double>(cube.periods());
  for (std::size_t i = 0; i < cube.item_count(); ++i)
    if (static_cast<double>(nonzero_periods(cube, i)) >= min_nonzero_frac * periods) keep.push_back(i);
  if (keep.empty()) throw Error("no items survive filter");
  return select_items(cube, keep);
}

struct CubeSummary {
  std::vector<std::string> items;
  std::vector<std::int64_t> zero_period_count;  // per item
  std::int64_t first_period = 0;
  int horizon = 0;
  // totals[t - first_period][h] = sum over items of q[t][h]
  std::vector<std::vector<std::int64_t>> totals;
  std::size_t item_count = 0;
  std::int64_t period_count = 0;
  std::size_t monotonicity_violations = 0;
};

inline CubeSummary summarize(const DemandCube& cube) {
  CubeSummary s;
  s.items = cube.items();
  s.first_period = cube.first_period();
  s.horizon = cube.horizon();
  s.item_count = cube.item_count();
  s.period_count = cube.periods();
  s.totals.assign(static_cast<std::size_t>(cube.periods()),
                  std::vector<std::int64_t>(static_cast<std::size_t>(cube.horizon()), 0));
  s.zero_period_count.reserve(cube.item_count());
  for (std::size_t i = 0; i < cube.item_count(); ++i) {
    s.zero_period_count.push_back(cube.periods() - nonzero_periods(cube, i));
    for (auto t = cube.first_period(); t <= cube.last_period(); ++t)
      for (int h = 0; h < cube.horizon(); ++h)
        s.totals[static_cast<std::size_t>(t - cube.first_period())][static_cast<std::size_t>(h)] +=
            cube.at(i, t, h);
  }
  if (cube.semantics() == Semantics::gross) s.monotonicity_violations = cube.monotonicity_violations();
  return s;
}

// zeros_per_item.csv: item_code,zero_periods
inline void write_zeros_per_item(std::ostream& out, const CubeSummary& s) {
  out << "item_code,zero_periods\n";
  for (std::size_t i = 0; i < s.items.size(); ++i)
    out << csv::quote(s.items[i]) << ',' << s.zero_period_count[i] << '\n';
}

// quantity_by_delivery.csv: period,delivery_date,quantity (long format)
inline void write_quantity_by_delivery(std::ostream& out, const CubeSummary& s) {
  out << "period,delivery_date,quantity\n";
  for (std::size_t t = 0; t < s.totals.size(); ++t)
    for (int h = 0; h < s.horizon; ++h)
      out << s.first_period + static_cast<std::int64_t>(t) << ',' << h << ','
          << s.totals[t][static_cast<std::size_t>(h)] << '\n';
}

// Dense export in the input schema, zero cells included. Net cubes may carry
// negative quantities here; parse_orders rejects those on re-read.
inline void write_orders_csv(std::ostream& out, const DemandCube& cube, bool skip_zero_rows = false) {
  out << "item_code,period,delivery_date,quantity\n";
  for (std::size_t i = 0; i < cube.item_count(); ++i)
    for (auto t = cube.first_period(); t <= cube.last_period(); ++t)
      for (int h = 0; h < cube.horizon(); ++h) {
        const auto v = cube.at(i, t, h);
        if (skip_zero_rows && v == 0) continue;
        out << csv::quote(cube.items()[i]) << ',' << t << ',' << h << ',' << v << '\n';
      }
}

}  // namespace btof
