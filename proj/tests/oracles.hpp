#pragma once

// Test-only reference implementations. These deliberately avoid the
// library's code paths: plain loops, long double accumulation, and
// textbook definitions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace oracle {

struct Stats {
  double mean, std, min, q25, q50, q75, max;
};

// Quantile by the "closest ranks, linear interpolation" definition:
// q(p) = x[k] + (h - k)(x[k+1] - x[k]), h = (n-1)p, k = floor(h).
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const long double h = static_cast<long double>(v.size() - 1) * p;
  const auto k = static_cast<std::size_t>(h);
  if (k + 1 >= v.size()) return v.back();
  return static_cast<double>(v[k] + (h - static_cast<long double>(k)) * (v[k + 1] - v[k]));
}

inline Stats describe(const std::vector<double>& v) {
  long double sum = 0;
  for (double x : v) sum += x;
  const long double mean = sum / v.size();
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  Stats s{};
  s.mean = static_cast<double>(mean);
  s.std = v.size() > 1 ? static_cast<double>(std::sqrt(ss / (v.size() - 1))) : 0.0;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.q25 = quantile(v, 0.25);
  s.q50 = quantile(v, 0.50);
  s.q75 = quantile(v, 0.75);
  return s;
}

struct Metrics {
  double mae, mse, rmse;
  std::optional<double> r2, mape;
};

inline Metrics metrics(const std::vector<double>& a, const std::vector<double>& p) {
  const std::size_t n = a.size();
  long double abs_sum = 0, sq_sum = 0, mean = 0, pct = 0;
  bool zero = false;
  for (std::size_t i = 0; i < n; ++i) mean += a[i];
  mean /= n;
  long double ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double e = static_cast<long double>(a[i]) - p[i];
    abs_sum += std::fabs(e);
    sq_sum += e * e;
    ss_tot += (a[i] - mean) * (a[i] - mean);
    if (a[i] == 0) zero = true; else pct += std::fabs(e / a[i]);
  }
  Metrics m{};
  m.mae = static_cast<double>(abs_sum / n);
  m.mse = static_cast<double>(sq_sum / n);
  m.rmse = static_cast<double>(std::sqrt(sq_sum / n));
  if (ss_tot > 0) m.r2 = static_cast<double>(1 - sq_sum / ss_tot);
  if (!zero) m.mape = static_cast<double>(100 * pct / n);
  return m;
}

// Central finite difference of f at x[i], restoring x[i] afterwards.
inline double central_difference(const std::function<double()>& f, double& xi, double eps) {
  const double saved = xi;
  xi = saved + eps;
  const double up = f();
  xi = saved - eps;
  const double down = f();
  xi = saved;
  return (up - down) / (2 * eps);
}

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

// Exact P(individual i wins) for a k-tournament over distinct contestants,
// by enumerating all k-subsets (ties to the lowest index).
inline std::vector<double> tournament_probabilities(const std::vector<double>& fitness, std::size_t k) {
  const std::size_t n = fitness.size();
  std::vector<double> wins(n, 0.0);
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
  std::size_t subsets = 0;
  do {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i] && (best == n || fitness[i] > fitness[best])) best = i;
    }
    wins[best] += 1;
    ++subsets;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  for (auto& w : wins) w /= static_cast<double>(subsets);
  return wins;
}

}  // namespace oracle
