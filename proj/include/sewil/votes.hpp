#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sewil/matrix.hpp"

namespace sewil {

/// Per-example, per-class votes of a majority-vote classifier. Each row is a
/// probability vector over the K classes.
class VoteMatrix {
 public:
  VoteMatrix() = default;
  VoteMatrix(std::size_t rows, std::size_t classes) : values_(rows, classes) {}
  explicit VoteMatrix(Matrix values) : values_(std::move(values)) {}

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t classes() const noexcept { return values_.cols(); }

  double& operator()(std::size_t r, std::size_t c) { return values_(r, c); }
  double operator()(std::size_t r, std::size_t c) const { return values_(r, c); }
  std::span<double> row(std::size_t r) { return values_.row(r); }
  std::span<const double> row(std::size_t r) const { return values_.row(r); }

  const Matrix& matrix() const noexcept { return values_; }

  /// Index of the largest vote; ties go to the smallest class index.
  int argmax(std::size_t r) const {
    const auto v = row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c)
      if (v[c] > v[best]) best = c;
    return static_cast<int>(best);
  }

  std::vector<int> argmax() const {
    std::vector<int> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = argmax(r);
    return out;
  }

  friend bool operator==(const VoteMatrix&, const VoteMatrix&) = default;

 private:
  Matrix values_;
};

inline bool is_probability_vector(std::span<const double> v, double tol = 1e-9) {
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= -tol)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

}  // namespace sewil
