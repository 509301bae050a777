#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace sewil {

struct MannWhitneyResult {
  double u_x = 0.0;  // pairs with x > y, ties counting one half
  double u_y = 0.0;
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

namespace detail {

// Midranks (1-based) of the pooled sample.
inline std::vector<double> midranks(std::span<const double> pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

/// Mann-Whitney U test. U comes from rank sums with midranks for ties. The
/// two-sided p-value is exact (permutation distribution of the pooled
/// midranks, so ties are handled) when both samples have fewer than 8
/// values, and otherwise uses the tie-corrected normal approximation with a
/// 0.5 continuity correction.
inline MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  const std::size_t n = x.size(), m = y.size(), total = n + m;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = detail::midranks(pooled);
  const double rx = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
  const double nd = static_cast<double>(n), md = static_cast<double>(m);

  MannWhitneyResult out;
  out.u_x = rx - nd * (nd + 1.0) / 2.0;
  out.u_y = nd * md - out.u_x;
  const double mean = nd * md / 2.0;
  const double observed = std::abs(out.u_x - mean);

  if (n < 8 && m < 8) {
    out.exact = true;
    std::vector<bool> pick(total, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n), true);
    std::size_t extreme = 0, count = 0;
    do {
      double r = 0.0;
      for (std::size_t i = 0; i < total; ++i)
        if (pick[i]) r += ranks[i];
      const double u = r - nd * (nd + 1.0) / 2.0;
      if (std::abs(u - mean) >= observed - 1e-9) ++extreme;
      ++count;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    out.p_value = static_cast<double>(extreme) / static_cast<double>(count);
    return out;
  }

  const double nt = static_cast<double>(total);
  double tie_term = 0.0;
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double var = nd * md / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
  if (!(var > 0.0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, observed - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t count = 0;
};

inline Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace sewil
