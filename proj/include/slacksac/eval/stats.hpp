#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "slacksac/error.hpp"

namespace slacksac::eval {

enum class Alternative { less, greater };

inline Alternative parse_alternative(const std::string& s) {
  if (s == "less") return Alternative::less;
  if (s == "greater") return Alternative::greater;
  throw ConfigError("alternative must be 'less' or 'greater', got '" + s + "'");
}

inline std::string to_string(Alternative a) { return a == Alternative::less ? "less" : "greater"; }

struct RankSumResult {
  double u_statistic = 0.0;  // U of the first sample
  double p_value = 1.0;
  Alternative alternative = Alternative::less;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  bool exact = false;
  bool degenerate = false;  // every observation identical
};

namespace detail {

/// Number of rank assignments giving each U in [0, m n], for samples of size
/// m and n without ties: f(u; m, n) = f(u - n; m - 1, n) + f(u; m, n - 1).
inline std::vector<double> u_counts(std::size_t m, std::size_t n) {
  // table[j][u] holds f(u; i, j) for the current i.
  std::vector<std::vector<double>> table(n + 1);
  for (std::size_t j = 0; j <= n; ++j) table[j] = {1.0};  // i = 0
  for (std::size_t i = 1; i <= m; ++i) {
    std::vector<std::vector<double>> next(n + 1);
    next[0] = {1.0};  // j = 0: U is always 0
    for (std::size_t j = 1; j <= n; ++j) {
      next[j].assign(i * j + 1, 0.0);
      for (std::size_t u = 0; u < table[j].size(); ++u) next[j][u + j] += table[j][u];
      for (std::size_t u = 0; u < next[j - 1].size(); ++u) next[j][u] += next[j - 1][u];
    }
    table = std::move(next);
  }
  return table[n];
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Midranks of the pooled sample, in input order (x first, then y).
inline std::vector<double> midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// One-sided Mann-Whitney rank-sum test. `less` tests whether x tends to be
/// smaller than y. Exact null distribution for tie-free samples with
/// n_x + n_y <= 12, otherwise the normal approximation with continuity and
/// tie correction.
inline RankSumResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                                    Alternative alternative) {
  if (x.empty() || y.empty()) throw ConfigError("mann_whitney_u needs non-empty samples");
  RankSumResult r;
  r.alternative = alternative;
  r.n_x = x.size();
  r.n_y = y.size();
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  for (double v : pooled)
    if (!std::isfinite(v)) throw NumericError("mann_whitney_u: non-finite observation");
  const auto ranks = midranks(pooled);
  const double nx = static_cast<double>(r.n_x);
  const double ny = static_cast<double>(r.n_y);
  const double rank_sum_x = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(r.n_x), 0.0);
  r.u_statistic = rank_sum_x - nx * (nx + 1.0) / 2.0;

  // Tie groups.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1.0) ties = true;
    tie_term += t * t * t - t;
    i = j + 1;
  }
  if (sorted.front() == sorted.back()) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }

  if (!ties && r.n_x + r.n_y <= 12) {
    const auto counts = detail::u_counts(r.n_x, r.n_y);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::llround(r.u_statistic));
    double tail = 0.0;
    if (alternative == Alternative::less)
      for (std::size_t k = 0; k <= u; ++k) tail += counts[k];
    else
      for (std::size_t k = u; k < counts.size(); ++k) tail += counts[k];
    r.exact = true;
    r.p_value = std::clamp(tail / total, 0.0, 1.0);
    return r;
  }

  const double n = nx + ny;
  const double mean = nx * ny / 2.0;
  const double var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  const double sd = std::sqrt(var);
  double p;
  if (alternative == Alternative::less)
    p = detail::normal_cdf((r.u_statistic - mean + 0.5) / sd);
  else
    p = detail::normal_cdf(-(r.u_statistic - mean - 0.5) / sd);
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // population
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot summarize an empty sample");
  Summary s;
  s.n = values.size();
  const double n = static_cast<double>(s.n);
  // Welford keeps the variance accurate for large offsets.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (values[i] - mean);
  }
  s.mean = mean;
  s.sd = std::sqrt(std::max(0.0, m2 / n));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  return s;
}

}  // namespace slacksac::eval
