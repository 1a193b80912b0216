#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace graphdpo {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; either side may be -inf.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

/// Max-subtracted log-sum-exp. Returns -inf for an empty range.
inline double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = v > hi ? v : hi;
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

/// -log(sigmoid(x)) = log(1 + exp(-x)), stable for both signs.
inline double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace graphdpo
