#pragma once

// Margin moments and the C-bound family for majority-vote classifiers,
// including the corrections for imperfect (pseudo-) labels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sewil/matrix.hpp"
#include "sewil/votes.hpp"

namespace sewil {

/// First and second moments of the probabilistic margin random variable.
struct MarginMoments {
  double mu1 = 0.0;
  double mu2 = 0.0;
  std::size_t sample_count = 0;
};

/// A bound value. When the bound's precondition (positive first moment) does
/// not hold the value is the vacuous 1 and `undefined_precondition` is set.
struct BoundValue {
  double value = 1.0;
  bool undefined_precondition = false;
};

/// Column-stochastic matrix p(i, j) = P(noisy label = i | true label = j).
class MislabelingMatrix {
 public:
  MislabelingMatrix() = default;

  /// Validates column-stochasticity within `tol`.
  explicit MislabelingMatrix(Matrix p, double tol = 1e-9) : p_(std::move(p)) {
    if (p_.rows() != p_.cols() || p_.rows() == 0)
      throw std::invalid_argument("mislabeling matrix must be square and non-empty");
    for (std::size_t j = 0; j < p_.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < p_.rows(); ++i) {
        const double v = p_(i, j);
        if (!(v >= 0.0) || !std::isfinite(v))
          throw std::invalid_argument("mislabeling matrix has a negative or non-finite entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument("mislabeling matrix column " + std::to_string(j) +
                                    " does not sum to 1");
    }
  }

  static MislabelingMatrix identity(std::size_t classes) {
    Matrix p(classes, classes);
    for (std::size_t i = 0; i < classes; ++i) p(i, i) = 1.0;
    return MislabelingMatrix(std::move(p));
  }

  std::size_t classes() const noexcept { return p_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }
  const Matrix& matrix() const noexcept { return p_; }

 private:
  Matrix p_;
};

/// Vote for `y` minus the largest vote among the other classes.
inline double margin(std::span<const double> votes, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= votes.size())
    throw std::invalid_argument("margin: class index out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < votes.size(); ++c)
    if (static_cast<int>(c) != y) other = std::max(other, votes[c]);
  if (votes.size() == 1) other = 0.0;
  return votes[static_cast<std::size_t>(y)] - other;
}

/// Moments of the margin random variable M where, given x, M equals the
/// margin for class i with probability W(x, i). The expectation over x is
/// uniform over the supplied rows, optionally restricted by `mask`.
inline MarginMoments margin_moments(const VoteMatrix& votes, const Matrix& class_probs,
                                    const std::vector<bool>& mask = {}) {
  if (votes.rows() != class_probs.rows() || votes.classes() != class_probs.cols())
    throw std::invalid_argument("margin_moments: vote and probability shapes differ");
  if (!mask.empty() && mask.size() != votes.rows())
    throw std::invalid_argument("margin_moments: mask length differs from row count");

  const std::size_t k = votes.classes();
  double s1 = 0.0, s2 = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < votes.rows(); ++r) {
    if (!mask.empty() && !mask[r]) continue;
    const auto w = class_probs.row(r);
    if (!is_probability_vector(w))
      throw std::invalid_argument("margin_moments: row " + std::to_string(r) +
                                  " of class probabilities is not stochastic");
    const auto v = votes.row(r);
    // The top two votes give every margin in O(K).
    std::size_t top = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (v[c] > v[top]) top = c;
    double second = k > 1 ? -std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t c = 0; c < k; ++c)
      if (c != top) second = std::max(second, v[c]);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double m = v[c] - (c == top ? second : v[top]);
      e1 += w[c] * m;
      e2 += w[c] * m * m;
    }
    s1 += e1;
    s2 += e2;
    ++count;
  }
  if (count == 0) return {};
  return {s1 / static_cast<double>(count), s2 / static_cast<double>(count), count};
}

/// Same as above with W = V: votes stand in for the class posteriors.
inline MarginMoments margin_moments(const VoteMatrix& votes, const std::vector<bool>& mask = {}) {
  return margin_moments(votes, votes.matrix(), mask);
}

namespace detail {
inline BoundValue corrected_cbound(const MarginMoments& m, double divisor) {
  if (!(m.mu1 > 0.0) || !(m.mu2 > 0.0)) return {1.0, true};
  const double v = 1.0 - (m.mu1 * m.mu1 / m.mu2) / divisor;
  return {std::clamp(v, 0.0, 1.0), false};
}
}  // namespace detail

/// 1 - mu1^2 / mu2.
inline BoundValue cbound(const MarginMoments& m) { return detail::corrected_cbound(m, 1.0); }

/// 1 - (mu1^2 / mu2) / gamma, the bound used as feature-selection criterion.
inline BoundValue cbound_il(const MarginMoments& m, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("cbound_il: gamma must be positive");
  return detail::corrected_cbound(m, gamma);
}

/// 1 - (mu1^2 / mu2) / beta. Tighter than cbound_il since beta <= gamma.
inline BoundValue cbound_beta(const MarginMoments& m, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("cbound_beta: beta must be positive");
  return detail::corrected_cbound(m, beta);
}

/// Largest row sum: max_i sum_j p(i, j).
inline double beta(const MislabelingMatrix& p) {
  double best = 0.0;
  for (std::size_t i = 0; i < p.classes(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < p.classes(); ++j) row += p(i, j);
    best = std::max(best, row);
  }
  return best;
}

/// Sum of column maxima: sum_j max_i p(i, j). Always >= beta; equals K for
/// the identity.
inline double gamma(const MislabelingMatrix& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < p.classes(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < p.classes(); ++i) col = std::max(col, p(i, j));
    total += col;
  }
  return total;
}

/// Confusion-based estimate with additive smoothing:
///   p(i, j) = (#[pred = i, true = j] + alpha) / (#[true = j] + K alpha).
/// Only rows with `covered[r]` set are counted (all rows when empty). A class
/// with no counted rows gets a uniform column.
inline MislabelingMatrix estimate_mislabeling(std::span<const int> truth,
                                              std::span<const int> predicted,
                                              std::size_t classes, double alpha = 1.0,
                                              const std::vector<bool>& covered = {}) {
  if (truth.empty()) throw std::invalid_argument("estimate_mislabeling: empty labeled set");
  if (truth.size() != predicted.size() || (!covered.empty() && covered.size() != truth.size()))
    throw std::invalid_argument("estimate_mislabeling: length mismatch");
  if (alpha < 0.0) throw std::invalid_argument("estimate_mislabeling: negative smoothing");

  Matrix counts(classes, classes);
  std::vector<double> totals(classes, 0.0);
  for (std::size_t r = 0; r < truth.size(); ++r) {
    if (!covered.empty() && !covered[r]) continue;
    const int y = truth[r], yhat = predicted[r];
    if (y < 0 || yhat < 0 || static_cast<std::size_t>(y) >= classes ||
        static_cast<std::size_t>(yhat) >= classes)
      throw std::invalid_argument("estimate_mislabeling: label out of range");
    counts(static_cast<std::size_t>(yhat), static_cast<std::size_t>(y)) += 1.0;
    totals[static_cast<std::size_t>(y)] += 1.0;
  }

  const double k = static_cast<double>(classes);
  Matrix p(classes, classes);
  for (std::size_t j = 0; j < classes; ++j) {
    const double denom = totals[j] + k * alpha;
    for (std::size_t i = 0; i < classes; ++i)
      p(i, j) = denom > 0.0 ? (counts(i, j) + alpha) / denom : 1.0 / k;
  }
  return MislabelingMatrix(std::move(p));
}

}  // namespace sewil
