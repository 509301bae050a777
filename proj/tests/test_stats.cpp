#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "sewil/stats.hpp"

using namespace sewil;
using Catch::Approx;

namespace {

double pair_count(const std::vector<double>& x, const std::vector<double>& y) {
  double u = 0.0;
  for (double a : x)
    for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return u;
}

}  // namespace

TEST_CASE("U statistic of the worked example", "[stats]") {
  const std::vector<double> x{3, 4, 5}, y{1, 2, 6};
  const auto r = mann_whitney_u(x, y);
  CHECK(r.u_x == 6.0);
  CHECK(r.u_x + r.u_y == 9.0);
  CHECK(r.exact);
}

TEST_CASE("identical samples", "[stats]") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto r = mann_whitney_u(x, x);
  CHECK(r.u_x == 12.5);
  CHECK(r.p_value == Approx(1.0));
  std::vector<double> big(12);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<double>(i);
  const auto n = mann_whitney_u(big, big);
  CHECK_FALSE(n.exact);
  CHECK(n.u_x == 72.0);
  CHECK(n.p_value == Approx(1.0));
}

TEST_CASE("complete separation reaches the minimal exact p", "[stats]") {
  const std::vector<double> x{10, 11, 12, 13}, y{1, 2, 3};
  const auto r = mann_whitney_u(x, y);
  CHECK(r.u_x == 12.0);
  // Two of the C(7,3) = 35 rank assignments are as extreme.
  CHECK(r.p_value == Approx(2.0 / 35.0));
}

TEST_CASE("U matches exhaustive pair counting", "[stats][oracle]") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> small(0, 4);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 6, m = 1 + rng() % 6;
    std::vector<double> x(n), y(m);
    for (auto& v : x) v = small(rng);
    for (auto& v : y) v = small(rng);
    const auto r = mann_whitney_u(x, y);
    REQUIRE(r.u_x == pair_count(x, y));
    REQUIRE(r.u_y == pair_count(y, x));
    REQUIRE(r.u_x + r.u_y == static_cast<double>(n * m));
    REQUIRE(r.p_value >= 0.0);
    REQUIRE(r.p_value <= 1.0);
  }
}

TEST_CASE("normal approximation on well-separated samples", "[stats]") {
  std::vector<double> x(20), y(20);
  for (int i = 0; i < 20; ++i) {
    x[static_cast<std::size_t>(i)] = 100 + i;
    y[static_cast<std::size_t>(i)] = i;
  }
  const auto r = mann_whitney_u(x, y);
  CHECK_FALSE(r.exact);
  CHECK(r.u_x == 400.0);
  // z = (200 - 0.5) / sqrt(20*20*41/12)
  CHECK(r.p_value == Approx(std::erfc((199.5 / std::sqrt(400.0 * 41.0 / 12.0)) / std::sqrt(2.0))));
  CHECK(r.p_value < 0.01);
}

TEST_CASE("empty samples are rejected", "[stats]") {
  const std::vector<double> x{1.0}, none;
  CHECK_THROWS_AS(mann_whitney_u(x, none), std::invalid_argument);
  CHECK_THROWS_AS(mann_whitney_u(none, x), std::invalid_argument);
}

TEST_CASE("summary statistics", "[stats]") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto s = summarize(v);
  CHECK(s.mean == 5.0);
  CHECK(s.stddev == Approx(std::sqrt(32.0 / 7.0)));
  CHECK(summarize(std::vector<double>{3.0}).stddev == 0.0);
  CHECK(summarize(std::vector<double>{}).count == 0);
}
