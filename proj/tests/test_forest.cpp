#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "sewil/dataset.hpp"
#include "sewil/forest.hpp"

using namespace sewil;
using Catch::Approx;

namespace {

struct Xy {
  Matrix x;
  std::vector<int> y;
};

Xy gather(const PartitionedDataset& ds, Partition p) {
  const auto rows = ds.rows_in(p);
  Xy out{ds.features.gather_rows(rows), {}};
  for (auto r : rows) out.y.push_back(ds.truth[r]);
  return out;
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

ForestConfig small(std::size_t trees, std::uint64_t seed = 1) {
  ForestConfig c;
  c.tree_count = trees;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("separable data is fitted perfectly", "[forest]") {
  const auto s = generate_synthetic({300, 5, 2, 2, 0.0, 0.05, 2});
  const auto f = fit(s.data.features, s.data.truth, 2, small(50));
  CHECK(accuracy(predict(f, s.data.features), s.data.truth) == 1.0);
}

TEST_CASE("single-class training yields one-hot votes", "[forest]") {
  Matrix x(10, 2);
  for (std::size_t r = 0; r < 10; ++r) x(r, 0) = static_cast<double>(r);
  const std::vector<int> y(10, 2);
  const auto f = fit(x, y, 3, small(5));
  CHECK(f.single_class());
  const auto v = votes(f, x);
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(v(r, 0) == 0.0);
    CHECK(v(r, 1) == 0.0);
    CHECK(v(r, 2) == 1.0);
  }
}

TEST_CASE("fits are reproducible and independent of worker count", "[forest]") {
  const auto s = generate_synthetic({200, 8, 3, 3, 0.1, 0.0, 5});
  auto cfg = small(30, 77);
  const auto a = fit(s.data.features, s.data.truth, 3, cfg);
  cfg.workers = 3;
  const auto b = fit(s.data.features, s.data.truth, 3, cfg);
  CHECK(votes(a, s.data.features).matrix() == votes(b, s.data.features, 4).matrix());
  CHECK(a.to_json() == b.to_json());
  cfg.seed = 78;
  const auto c = fit(s.data.features, s.data.truth, 3, cfg);
  CHECK_FALSE(votes(a, s.data.features).matrix() == votes(c, s.data.features).matrix());
}

TEST_CASE("a single stump with one leaf votes its class fractions", "[forest]") {
  Matrix x(10, 1, 0.0);  // constant feature: no split possible
  std::vector<int> y{0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  ForestConfig cfg = small(1);
  cfg.bootstrap = false;
  const auto f = fit(x, y, 2, cfg);
  REQUIRE(f.trees().front().nodes.size() == 1);
  Matrix probe(3, 1);
  probe(1, 0) = -5;
  probe(2, 0) = 5;
  const auto v = votes(f, probe);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(v(r, 0) == Approx(0.7));
    CHECK(v(r, 1) == Approx(0.3));
  }
  const auto w = feature_weights(f);
  CHECK(w == std::vector<double>{1.0});
}

TEST_CASE("votes average trees", "[forest]") {
  // Two bootstrap-free trees on opposite labels of the same point.
  Matrix x(1, 1, 0.0);
  ForestConfig cfg = small(1);
  cfg.bootstrap = false;
  const auto a = fit(x, std::vector<int>{0}, 2, cfg);
  const auto b = fit(x, std::vector<int>{1}, 2, cfg);
  auto j = a.to_json();
  j["trees"].push_back(b.to_json()["trees"][0]);
  j["in_bag"].push_back(b.to_json()["in_bag"][0]);
  const auto both = Forest::from_json(j);
  const auto v = votes(both, x);
  CHECK(v(0, 0) == 0.5);
  CHECK(v(0, 1) == 0.5);
  CHECK(predict(both, x) == std::vector<int>{0});
}

TEST_CASE("vote rows are distributions and predict is their argmax", "[forest][property]") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const std::size_t k = 2 + rng() % 4;
    const auto s = generate_synthetic({120, 6, 3, k, 0.2, 0.0, rng()});
    const auto f = fit(s.data.features, s.data.truth, k, small(15, rng()));
    Matrix probe(40, 6);
    std::uniform_real_distribution<double> u(-2, 2);
    for (std::size_t r = 0; r < 40; ++r)
      for (std::size_t c = 0; c < 6; ++c) probe(r, c) = u(rng);
    const auto v = votes(f, probe);
    const auto p = predict(f, probe);
    for (std::size_t r = 0; r < 40; ++r) {
      REQUIRE(is_probability_vector(v.row(r), 1e-9));
      REQUIRE(p[r] == v.argmax(r));
    }
  }
}

TEST_CASE("argmax tie rule", "[forest]") {
  VoteMatrix v(2, 3);
  v(0, 0) = 0.2;
  v(0, 1) = 0.5;
  v(0, 2) = 0.3;
  v(1, 0) = 0.5;
  v(1, 1) = 0.5;
  CHECK(v.argmax(0) == 1);
  CHECK(v.argmax(1) == 0);
}

TEST_CASE("one-tree OOB rows are the out-of-bootstrap rows", "[forest]") {
  const auto s = generate_synthetic({100, 4, 2, 2, 0.0, 0.0, 6});
  const auto f = fit(s.data.features, s.data.truth, 2, small(1, 9));
  const auto oob = oob_votes(f, s.data.features);
  for (std::size_t r = 0; r < 100; ++r) CHECK(oob.covered[r] == (f.in_bag()[0][r] == 0));
  const auto total = std::accumulate(f.in_bag()[0].begin(), f.in_bag()[0].end(), 0U);
  CHECK(total == 100U);
  for (std::size_t r = 0; r < 100; ++r)
    if (!oob.covered[r]) CHECK(oob.votes(r, 0) == 0.5);
}

TEST_CASE("OOB coverage with many trees", "[forest]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = generate_synthetic({60, 4, 2, 2, 0.1, 0.0, seed});
    const auto f = fit(s.data.features, s.data.truth, 2, small(200, seed));
    CHECK(oob_votes(f, s.data.features).coverage() >= 0.99);
  }
}

TEST_CASE("OOB error boundaries", "[forest]") {
  VoteMatrix v(3, 2);
  v(0, 0) = 1;
  v(1, 1) = 1;
  v(2, 0) = 0.5;
  v(2, 1) = 0.5;
  const OobVotes oob{v, {true, true, false}};
  CHECK(oob_error(oob, std::vector<int>{0, 1, 1}) == 0.0);
  CHECK(oob_error(oob, std::vector<int>{1, 0, 0}) == 1.0);
  const OobVotes none{v, {false, false, false}};
  CHECK_THROWS(oob_error(none, std::vector<int>{0, 0, 0}));
}

TEST_CASE("OOB error tracks holdout error", "[forest][oracle]") {
  const auto s = generate_synthetic({1000, 20, 5, 2, 0.0, 0.05, 21});
  const auto part = split(s.data, {0.5, 0.0, 0.5}, 4);
  const auto tr = gather(part, Partition::Labeled), te = gather(part, Partition::Test);
  const auto f = fit(tr.x, tr.y, 2, small(200, 5));
  const double holdout = 1.0 - accuracy(predict(f, te.x), te.y);
  CHECK(std::abs(oob_error(f, tr.x, tr.y) - holdout) <= 0.05);
}

TEST_CASE("a single split puts all weight on its feature", "[forest]") {
  Matrix x(8, 5, 0.0);
  std::vector<int> y(8);
  for (std::size_t r = 0; r < 8; ++r) {
    x(r, 3) = static_cast<double>(r);
    y[r] = r < 4 ? 0 : 1;
  }
  ForestConfig cfg = small(1);
  cfg.bootstrap = false;
  cfg.features_per_split = 5;
  const auto f = fit(x, y, 2, cfg);
  CHECK(f.trees().front().nodes.size() == 3);
  CHECK(feature_weights(f) == std::vector<double>{0, 0, 0, 1, 0});
}

TEST_CASE("importance weights are a distribution favouring informative features", "[forest][oracle]") {
  const auto s = generate_synthetic({600, 50, 5, 2, 0.0, 0.0, 31});
  const auto f = fit(s.data.features, s.data.truth, 2, small(100, 2));
  const auto w = feature_weights(f);
  double total = 0.0, inf = 0.0, noise = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    REQUIRE(w[j] >= 0.0);
    total += w[j];
    const bool is_inf = std::binary_search(s.rule.informative.begin(), s.rule.informative.end(), j);
    (is_inf ? inf : noise) += w[j];
  }
  CHECK(total == Approx(1.0));
  CHECK(inf / 5.0 > noise / 45.0);
}

TEST_CASE("forest configuration and input validation", "[forest]") {
  Matrix x(3, 1);
  CHECK_THROWS_AS(fit(x, std::vector<int>{0, 1}, 2, small(1)), std::invalid_argument);
  CHECK_THROWS_AS(fit(x, std::vector<int>{0, 1, 2}, 2, small(1)), std::invalid_argument);
  CHECK_THROWS_AS(fit(x, std::vector<int>{0, 1, 1}, 2, small(0)), std::invalid_argument);
  const auto f = fit(x, std::vector<int>{0, 1, 1}, 2, small(2));
  CHECK_THROWS_AS(votes(f, Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("depth and leaf limits are honoured", "[forest]") {
  const auto s = generate_synthetic({300, 5, 3, 2, 0.2, 0.0, 8});
  ForestConfig cfg = small(5);
  cfg.max_depth = 0;
  const auto stump = fit(s.data.features, s.data.truth, 2, cfg);
  for (const auto& t : stump.trees()) CHECK(t.nodes.size() == 1);
  cfg.max_depth.reset();
  cfg.min_leaf = 400;
  const auto big_leaf = fit(s.data.features, s.data.truth, 2, cfg);
  for (const auto& t : big_leaf.trees()) CHECK(t.nodes.size() == 1);
}

TEST_CASE("forest JSON round trip", "[forest]") {
  const auto s = generate_synthetic({80, 4, 2, 2, 0.1, 0.0, 3});
  const auto f = fit(s.data.features, s.data.truth, 2, small(4));
  const auto g = Forest::from_json(nlohmann::json::parse(f.to_json().dump()));
  CHECK(votes(f, s.data.features).matrix() == votes(g, s.data.features).matrix());
}
