#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "sewil/bounds.hpp"

using namespace sewil;
using Catch::Approx;

namespace {

Matrix from_rows(std::vector<std::vector<double>> rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += (x = e(rng));
  for (auto& x : v) x /= s;
  return v;
}

MislabelingMatrix random_mislabeling(std::size_t k, std::mt19937_64& rng) {
  Matrix p(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto col = random_simplex(k, rng);
    for (std::size_t i = 0; i < k; ++i) p(i, j) = col[i];
  }
  return MislabelingMatrix(std::move(p));
}

// Two-level expectation written out over every (row, class) outcome, with the
// competing vote found by scanning all other classes.
MarginMoments brute_moments(const Matrix& v, const Matrix& w) {
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t i = 0; i < v.cols(); ++i) {
      double other = v.cols() == 1 ? 0.0 : -1e300;
      for (std::size_t c = 0; c < v.cols(); ++c)
        if (c != i && v(r, c) > other) other = v(r, c);
      const double m = v(r, i) - other;
      s1 += w(r, i) * m;
      s2 += w(r, i) * m * m;
    }
  }
  const double n = static_cast<double>(v.rows());
  return {s1 / n, s2 / n, v.rows()};
}

}  // namespace

TEST_CASE("margin of a vote vector", "[bounds]") {
  const std::vector<double> v{0.7, 0.3};
  CHECK(margin(v, 0) == Approx(0.4));
  CHECK(margin(v, 1) == Approx(-0.4));
  const std::vector<double> v3{0.5, 0.3, 0.2};
  CHECK(margin(v3, 0) == Approx(0.2));
  const std::vector<double> u{1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int y = 0; y < 3; ++y) CHECK(margin(u, y) == 0.0);
  CHECK_THROWS_AS(margin(v, 2), std::invalid_argument);
}

TEST_CASE("margin moments of a single two-class row", "[bounds]") {
  const VoteMatrix v(from_rows({{0.7, 0.3}}));
  const auto m = margin_moments(v);
  CHECK(m.mu1 == Approx(0.16).margin(1e-15));
  CHECK(m.mu2 == Approx(0.16).margin(1e-15));
  CHECK(m.sample_count == 1);
}

TEST_CASE("one-hot votes and labels give unit moments", "[bounds]") {
  const Matrix w = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  const auto m = margin_moments(VoteMatrix(w), w);
  CHECK(m.mu1 == 1.0);
  CHECK(m.mu2 == 1.0);
}

TEST_CASE("margin moments match brute-force enumeration", "[bounds][oracle]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng() % 5, k = 1 + rng() % 3;
    Matrix v(n, k), w(n, k);
    for (std::size_t r = 0; r < n; ++r) {
      const auto a = random_simplex(k, rng), b = random_simplex(k, rng);
      for (std::size_t c = 0; c < k; ++c) {
        v(r, c) = a[c];
        w(r, c) = b[c];
      }
    }
    const auto got = margin_moments(VoteMatrix(v), w);
    const auto want = brute_moments(v, w);
    REQUIRE(got.mu1 == Approx(want.mu1).margin(1e-12));
    REQUIRE(got.mu2 == Approx(want.mu2).margin(1e-12));
  }
}

TEST_CASE("mask restricts the averaged rows", "[bounds]") {
  const VoteMatrix v(from_rows({{0.7, 0.3}, {0.0, 1.0}}));
  const auto m = margin_moments(v, std::vector<bool>{true, false});
  CHECK(m.sample_count == 1);
  CHECK(m.mu1 == Approx(0.16));
  const auto none = margin_moments(v, std::vector<bool>{false, false});
  CHECK(none.sample_count == 0);
  CHECK(cbound(none).undefined_precondition);
}

TEST_CASE("margin moments reject non-stochastic class probabilities", "[bounds]") {
  const VoteMatrix v(from_rows({{0.7, 0.3}}));
  CHECK_THROWS_AS(margin_moments(v, from_rows({{0.7, 0.4}})), std::invalid_argument);
  CHECK_THROWS_AS(margin_moments(v, from_rows({{0.7, 0.3, 0.0}})), std::invalid_argument);
}

TEST_CASE("C-bound values", "[bounds]") {
  const MarginMoments m{0.16, 0.16, 1};
  CHECK(cbound(m).value == Approx(0.84));
  CHECK_FALSE(cbound(m).undefined_precondition);
  CHECK(cbound({1.0, 1.0, 1}).value == 0.0);
  const auto neg = cbound({-0.1, 0.2, 1});
  CHECK(neg.value == 1.0);
  CHECK(neg.undefined_precondition);
  CHECK(cbound_il({0.0, 0.2, 1}, 2.0).undefined_precondition);
}

TEST_CASE("corrected C-bounds", "[bounds]") {
  const MarginMoments m{0.16, 0.16, 1};
  CHECK(cbound_il(m, 1.0).value == cbound(m).value);
  CHECK(cbound_beta(m, 1.0).value == cbound(m).value);
  CHECK(cbound_il(m, 1.7).value == Approx(1.0 - 0.16 / 1.7));
  CHECK(cbound_il(m, 1.7).value == Approx(0.9059).margin(1e-4));
  CHECK(cbound_beta(m, 1.1).value == Approx(0.8545).margin(1e-4));
  CHECK_THROWS_AS(cbound_il(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cbound_beta(m, -1.0), std::invalid_argument);

  double prev = 0.0;
  for (double g = 1.0; g < 1e6; g *= 1.7) {
    const double v = cbound_il(m, g).value;
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev == Approx(1.0).margin(1e-6));
}

TEST_CASE("beta and gamma of the worked example", "[bounds]") {
  const MislabelingMatrix p(from_rows({{0.9, 0.2}, {0.1, 0.8}}));
  CHECK(beta(p) == Approx(1.1));
  CHECK(gamma(p) == Approx(1.7));
}

TEST_CASE("beta and gamma of special matrices", "[bounds]") {
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto id = MislabelingMatrix::identity(k);
    CHECK(beta(id) == 1.0);
    // Sum of column maxima: one per column.
    CHECK(gamma(id) == static_cast<double>(k));
    const MislabelingMatrix uni(Matrix(k, k, 1.0 / static_cast<double>(k)));
    CHECK(beta(uni) == Approx(1.0));
    CHECK(gamma(uni) == Approx(1.0));
  }
}

TEST_CASE("gamma dominates beta on random column-stochastic matrices", "[bounds][property]") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 1 + rng() % 10;
    const auto p = random_mislabeling(k, rng);
    REQUIRE(gamma(p) >= beta(p) - 1e-12);
    REQUIRE(beta(p) >= 1.0 - 1e-12);
    REQUIRE(gamma(p) <= static_cast<double>(k) + 1e-12);
    for (double b : {beta(p)}) {
      const MarginMoments m{0.3, 0.5, 1};
      REQUIRE(cbound_beta(m, b).value <= cbound_il(m, gamma(p)).value + 1e-15);
    }
  }
}

TEST_CASE("mislabeling matrix validation", "[bounds]") {
  CHECK_THROWS_AS(MislabelingMatrix(from_rows({{0.9, 0.2}, {0.2, 0.8}})), std::invalid_argument);
  CHECK_THROWS_AS(MislabelingMatrix(from_rows({{1.1, 0.0}, {-0.1, 1.0}})), std::invalid_argument);
  CHECK_THROWS_AS(MislabelingMatrix(Matrix(2, 3, 0.5)), std::invalid_argument);
}

TEST_CASE("mislabeling estimate by counting", "[bounds]") {
  const std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const auto p = estimate_mislabeling(truth, pred, 2, 0.0);
  CHECK(p(0, 0) == 0.5);
  CHECK(p(1, 0) == 0.5);
  CHECK(p(0, 1) == 0.0);
  CHECK(p(1, 1) == 1.0);

  const auto perfect = estimate_mislabeling(truth, truth, 2, 0.0);
  CHECK(perfect.matrix() == MislabelingMatrix::identity(2).matrix());

  const auto smoothed = estimate_mislabeling(truth, pred, 2, 1.0);
  CHECK(smoothed(0, 0) == Approx(2.0 / 4.0));
  CHECK(smoothed(0, 1) == Approx(1.0 / 4.0));
  CHECK(smoothed(1, 1) == Approx(3.0 / 4.0));
}

TEST_CASE("absent class gets a uniform column", "[bounds]") {
  const std::vector<int> truth{0, 0, 2}, pred{0, 0, 2};
  const auto p = estimate_mislabeling(truth, pred, 3, 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p(i, 1) == Approx(1.0 / 3.0));
  const auto masked = estimate_mislabeling(truth, pred, 3, 0.0, {true, true, false});
  for (std::size_t i = 0; i < 3; ++i) CHECK(masked(i, 2) == Approx(1.0 / 3.0));
}

TEST_CASE("mislabeling estimate rejects bad input", "[bounds]") {
  const std::vector<int> a{0, 1}, b{0};
  CHECK_THROWS_AS(estimate_mislabeling(a, b, 2), std::invalid_argument);
  CHECK_THROWS_AS(estimate_mislabeling(std::vector<int>{}, std::vector<int>{}, 2), std::invalid_argument);
  CHECK_THROWS_AS(estimate_mislabeling(a, std::vector<int>{0, 2}, 2), std::invalid_argument);
}
