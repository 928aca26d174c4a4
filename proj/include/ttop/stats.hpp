#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ttop/errors.hpp"

namespace ttop {

/// Type-7 empirical quantile of already sorted data (linear interpolation
/// between order statistics at h = (n-1)p).
template <typename Scalar>
Scalar quantile_sorted(std::span<const Scalar> sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile probability outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + static_cast<Scalar>(h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

template <typename Scalar>
Scalar quantile(std::vector<Scalar> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(std::span<const Scalar>(values), p);
}

/// Midpoint of the central order statistics for even counts.
template <typename Scalar>
Scalar median(std::vector<Scalar> values) {
  return quantile(std::move(values), 0.5);
}

template <typename Scalar>
Scalar mean(std::span<const Scalar> v) {
  if (v.empty()) throw ArgumentError("mean of empty sample");
  Scalar s = 0;
  for (Scalar x : v) s += x;
  return s / static_cast<Scalar>(v.size());
}

/// Sample standard deviation (n-1 denominator).
template <typename Scalar>
Scalar sample_sd(std::span<const Scalar> v) {
  if (v.size() < 2) throw ArgumentError("standard deviation needs at least two values");
  const Scalar m = mean(v);
  Scalar ss = 0;
  for (Scalar x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<Scalar>(v.size() - 1));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }
inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace ttop
