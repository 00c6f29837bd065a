#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "temcodec/error.hpp"
#include "temcodec/signal.hpp"

namespace temcodec {

namespace detail {

inline void require_same_grid(const GridSignal& a, const GridSignal& b) {
  const double scale = std::max({1.0, std::abs(a.t0), std::abs(b.t0)});
  if (a.size() != b.size() || std::abs(a.t0 - b.t0) > 1e-12 * scale ||
      std::abs(a.dt - b.dt) > 1e-12 * std::abs(a.dt))
    throw DataError("grid mismatch between estimate and truth");
}

// Index range [lo, hi) of the central 90%.
inline std::pair<std::size_t, std::size_t> mid90_range(std::size_t n) {
  const auto drop = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(n)));
  return {drop, n - drop};
}

}  // namespace detail

/// Mean squared error over the central 90% of grid indices.
inline double mse_mid90(const GridSignal& estimate, const GridSignal& truth) {
  detail::require_same_grid(estimate, truth);
  const auto [lo, hi] = detail::mid90_range(estimate.size());
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double d = estimate.values[i] - truth.values[i];
    s += d * d;
  }
  return s / static_cast<double>(hi - lo);
}

/// sqrt(dt * sum (a - b)^2) over the whole grid.
inline double l2_distance(const GridSignal& a, const GridSignal& b) {
  detail::require_same_grid(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return std::sqrt(a.dt * s);
}

/// Grid L2 distance restricted to the central 90%.
inline double l2_distance_mid90(const GridSignal& a, const GridSignal& b) {
  detail::require_same_grid(a, b);
  const auto [lo, hi] = detail::mid90_range(a.size());
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return std::sqrt(a.dt * s);
}

/// Ranks with ties averaged (1-based).
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("spearman: need two equal-length samples");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace temcodec
