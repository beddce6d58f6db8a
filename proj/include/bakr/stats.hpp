#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "bakr/common.hpp"

namespace bakr {

// Linear-interpolation quantile (R type 7) of an ascending-sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) {
    throw UsageError("quantile of an empty sample");
  }
  if (prob <= 0.0) return sorted.front();
  if (prob >= 1.0) return sorted.back();
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double sample_mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Unbiased (divisor n-1) sample variance.
inline double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace bakr
