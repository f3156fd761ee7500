#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "btof/error.hpp"
#include "btof/orderbook.hpp"
#include "btof/rng.hpp"

namespace btof {

struct SynthConfig {
  int n_items = 200;
  int periods = 45;
  int horizon = 4;
  double rho = 0.9;       // expected share of a period's demand booked exactly one period ahead
  double sparsity = 0.1;  // probability that a period has no demand at all
  double base_volume = 100.0;
  double ar_coef = 0.6;  // AR(1) coefficient of the relative demand deviation
  double trend = 0.0;    // relative level change per period
  double noise = 0.3;    // innovation scale, relative to base_volume
  double share_concentration = 0.3;  // Dirichlet concentration of the non-h=1 shares
  std::int64_t first_period = 0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_items < 1) throw Error("synth: n_items must be >= 1");
    if (horizon < 1) throw Error("synth: horizon must be >= 1");
    if (periods <= horizon + 2) throw Error("synth: periods must exceed horizon + 2");
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error("synth: rho must lie in [0, 1]");
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw Error("synth: sparsity must lie in [0, 1]");
    if (!(base_volume >= 0.0) || !(noise >= 0.0)) throw Error("synth: base_volume and noise must be >= 0");
    if (!(std::abs(ar_coef) < 1.0)) throw Error("synth: |ar_coef| must be < 1");
    if (!(share_concentration > 0.0)) throw Error("synth: share_concentration must be > 0");
  }
};

namespace detail {

inline double standard_normal(Rng& rng) {
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Marsaglia-Tsang, with the shape < 1 boost.
inline double gamma_draw(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = 1.0 - uniform01(rng);
    return gamma_draw(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform01(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

// Splits `total` into integers proportional to `weights` (largest remainder,
// ties to the lower index). The parts sum to `total` exactly.
inline std::vector<std::int64_t> apportion(std::int64_t total, const std::vector<double>& weights) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::int64_t> parts(weights.size(), 0);
  if (total == 0 || weights.empty()) return parts;
  if (!(wsum > 0.0)) {
    parts[0] = total;
    return parts;
  }
  std::vector<double> frac(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t h = 0; h < weights.size(); ++h) {
    const double exact = static_cast<double>(total) * weights[h] / wsum;
    parts[h] = static_cast<std::int64_t>(std::floor(exact));
    frac[h] = exact - static_cast<double>(parts[h]);
    assigned += parts[h];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::int64_t r = total - assigned, k = 0; r > 0; --r, ++k) ++parts[order[static_cast<std::size_t>(k) % order.size()]];
  return parts;
}

}  // namespace detail

// Synthetic gross order book. Per item and period:
//   e_t = ar_coef * e_{t-1} + noise * N(0, 1)
//   D_t = max(0, round(base_volume * (1 + trend * t + e_t))), zeroed w.p. sparsity
// D_t is split into net bookings with share rho at h = 1 and the remaining
// 1 - rho spread over the other delivery dates by a Dirichlet draw; gross
// volumes are suffix sums of the net bookings. The random draws of a period do
// not depend on rho or sparsity, so changing either keeps the streams aligned.
inline DemandCube generate(const SynthConfig& cfg) {
  cfg.validate();
  const int width = static_cast<int>(std::to_string(cfg.n_items).size());
  std::vector<std::string> names;
  for (int i = 0; i < cfg.n_items; ++i) {
    std::string num = std::to_string(i + 1);
    names.push_back("ITEM" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num);
  }
  const int H = cfg.horizon;
  DemandCube cube(std::move(names), cfg.first_period, cfg.first_period + cfg.periods - 1, H, Semantics::gross);
  std::vector<double> shares(static_cast<std::size_t>(H));
  for (int i = 0; i < cfg.n_items; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    double e = 0.0;
    for (int k = 0; k < cfg.periods; ++k) {
      e = cfg.ar_coef * e + cfg.noise * detail::standard_normal(rng);
      const double zero_draw = uniform01(rng);
      double level = cfg.base_volume * (1.0 + cfg.trend * k + e);
      std::int64_t demand = level > 0.0 ? static_cast<std::int64_t>(std::llround(level)) : 0;
      if (zero_draw < cfg.sparsity) demand = 0;

      std::vector<double> rest;
      for (int h = 0; h < H; ++h)
        if (h != 1) rest.push_back(detail::gamma_draw(rng, cfg.share_concentration));
      if (H == 1) {
        shares[0] = 1.0;
      } else {
        const double rsum = std::accumulate(rest.begin(), rest.end(), 0.0);
        for (int h = 0, r = 0; h < H; ++h)
          shares[static_cast<std::size_t>(h)] =
              h == 1 ? cfg.rho : (1.0 - cfg.rho) * (rsum > 0.0 ? rest[static_cast<std::size_t>(r++)] / rsum : 1.0 / (H - 1));
      }
      const auto net = detail::apportion(demand, shares);
      const std::int64_t t = cfg.first_period + k;
      std::int64_t run = 0;
      for (int h = H - 1; h >= 0; --h) {
        run += net[static_cast<std::size_t>(h)];
        cube.at(static_cast<std::size_t>(i), t, h) = run;
      }
    }
  }
  return cube;
}

}  // namespace btof
