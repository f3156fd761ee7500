#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "btof/orderbook.hpp"

namespace testutil {

// Random gross-or-net cube; `distinct` makes every cell value unique.
inline btof::DemandCube random_cube(std::mt19937_64& rng, int items, int periods, int horizon, bool distinct,
                                    btof::Semantics sem = btof::Semantics::gross, std::int64_t lo = 0,
                                    std::int64_t hi = 50) {
  std::vector<std::string> names;
  for (int i = 0; i < items; ++i) names.push_back("I" + std::to_string(i));
  btof::DemandCube cube(names, 0, periods - 1, horizon, sem);
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  std::int64_t next = 1;
  std::vector<std::int64_t> pool;
  if (distinct) {
    pool.resize(static_cast<std::size_t>(items) * periods * horizon);
    std::iota(pool.begin(), pool.end(), next);
    std::shuffle(pool.begin(), pool.end(), rng);
  }
  std::size_t k = 0;
  for (int i = 0; i < items; ++i)
    for (int t = 0; t < periods; ++t)
      for (int h = 0; h < horizon; ++h) cube.at(static_cast<std::size_t>(i), t, h) = distinct ? pool[k++] : dist(rng);
  return cube;
}

// Frontier (x, y) by direct classification of order-book cells: a cell
// (s, f) is known at t when s - f <= t. x holds the known cells of periods
// t..t+H-1 (row-major), then full rows t-1..t-L; y holds the unknown cells of
// periods t+1..t+H (row-major).
struct BruteFrontier {
  std::int64_t t;
  std::vector<double> x, y;
};

inline std::vector<BruteFrontier> brute_frontiers(const btof::DemandCube& c, std::size_t item, int lags) {
  const int H = c.horizon();
  std::vector<BruteFrontier> out;
  for (std::int64_t t = c.first_period(); t <= c.last_period(); ++t) {
    if (t - lags < c.first_period() || t + H > c.last_period()) continue;
    BruteFrontier b{t, {}, {}};
    for (std::int64_t s = t; s <= t + H; ++s)
      for (int f = 0; f < H; ++f)
        if (s - f <= t) b.x.push_back(static_cast<double>(c.at(item, s, f)));
    for (int l = 1; l <= lags; ++l)
      for (int f = 0; f < H; ++f) b.x.push_back(static_cast<double>(c.at(item, t - l, f)));
    for (std::int64_t s = t + 1; s <= t + H; ++s)
      for (int f = 0; f < H; ++f)
        if (s - f > t) b.y.push_back(static_cast<double>(c.at(item, s, f)));
    out.push_back(std::move(b));
  }
  return out;
}

// Ranks by counting: rank(v_i) = #{v_j < v_i} + (#{v_j == v_i} + 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double brute_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

inline double brute_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return brute_pearson(brute_ranks(a), brute_ranks(b));
}

// Fresh directory under the test's working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace testutil
