#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "sewil/pipeline.hpp"

using namespace sewil;
using Catch::Approx;

namespace {

ExperimentConfig quick_config() {
  ExperimentConfig cfg;
  cfg.forest.tree_count = 15;
  cfg.ga.generations = 3;
  cfg.ga.population = 6;
  cfg.ga.parents = 2;
  cfg.sla_rounds = 3;
  cfg.trials = 2;
  cfg.seed = 5;
  cfg.comparison_subsets = 6;
  return cfg;
}

PartitionedDataset quick_data(std::uint64_t seed = 1) {
  return generate_synthetic({240, 16, 3, 2, 0.0, 0.1, seed}).data;
}

}  // namespace

TEST_CASE("selection is deterministic for a fixed seed", "[pipeline]") {
  const auto ds = split(quick_data(), {0.15, 0.7, 0.15}, 1);
  const auto cfg = quick_config();
  const auto a = sewil_select(ds, cfg, 9);
  const auto b = sewil_select(ds, cfg, 9);
  CHECK(a.subset == b.subset);
  CHECK(a.gamma == b.gamma);
  CHECK(a.gamma >= 1.0);
  CHECK(a.gamma <= 2.0);
}

TEST_CASE("selection without unlabeled rows is a supervised wrapper", "[pipeline]") {
  const auto ds = split(quick_data(), {0.8, 0.0, 0.2}, 1);
  const auto r = sewil_select(ds, quick_config(), 3);
  CHECK(r.pseudo_labeled == 0);
  CHECK_FALSE(r.subset.empty());
}

TEST_CASE("evaluation accuracies", "[pipeline][oracle]") {
  const auto s = generate_synthetic({1000, 10, 3, 2, 0.0, 0.3, 4});
  const auto ds = split(s.data, {0.1, 0.8, 0.1}, 2);
  ForestConfig f;
  f.tree_count = 50;
  const auto full = evaluate_selection(ds, FeatureSubset::all(10), f);
  CHECK(full.acc_u >= 0.95);
  CHECK(full.acc_t >= 0.0);
  CHECK(full.acc_t <= 1.0);

  std::size_t noise = 0;
  while (std::binary_search(s.rule.informative.begin(), s.rule.informative.end(), noise)) ++noise;
  const auto weak = evaluate_selection(ds, FeatureSubset({noise}), f);
  std::size_t ones = 0;
  const auto unl = ds.rows_in(Partition::Unlabeled);
  for (auto r : unl) ones += ds.truth[r] == 1;
  const double majority = std::max(ones, unl.size() - ones) / static_cast<double>(unl.size());
  CHECK(std::abs(weak.acc_u - majority) <= 0.1);
}

TEST_CASE("empty partitions give NaN accuracy", "[pipeline]") {
  const auto ds = split(quick_data(), {0.5, 0.5, 0.0}, 1);
  ForestConfig f;
  f.tree_count = 5;
  const auto acc = evaluate_selection(ds, FeatureSubset({0, 1}), f);
  CHECK(std::isnan(acc.acc_t));
  CHECK_FALSE(std::isnan(acc.acc_u));
}

TEST_CASE("criterion comparison", "[pipeline]") {
  const auto ds = split(quick_data(2), {0.15, 0.7, 0.15}, 1);
  auto cfg = quick_config();
  const auto r = criterion_comparison(ds, cfg, 4);
  REQUIRE(r.gt);
  REQUIRE(r.picks.size() == 3);
  for (const auto& p : r.picks) CHECK(*r.gt >= p.acc_u);
  for (const auto& e : r.entries) CHECK(e.subset.size() == 4);
  CHECK(r.entries.size() == 6);

  cfg.skip_gt = true;
  const auto lite = criterion_comparison(ds, cfg, 4);
  CHECK_FALSE(lite.gt);
  for (std::size_t i = 0; i < 3; ++i) CHECK(lite.picks[i].acc_u == r.picks[i].acc_u);
}

TEST_CASE("CBIL with unit gamma ranks like CB", "[pipeline]") {
  const auto s = generate_synthetic({200, 12, 3, 2, 0.0, 0.0, 8});
  EvaluationContext ctx;
  ctx.features = s.data.features;
  ctx.labels = s.data.truth;
  ctx.labeled.assign(200, true);
  ctx.forest.tree_count = 10;
  GaConfig g;
  g.population = 8;
  for (const auto& c : init_population(12, g)) {
    const auto sc = score_subset(ctx, c.subset, 3);
    CHECK(sc.cbound_il.value == sc.cbound.value);
  }
}

TEST_CASE("pseudo-label corruption rate", "[pipeline]") {
  AugmentedSet aug;
  for (std::size_t r = 0; r < 5000; ++r) aug.pseudo_labels[r] = {static_cast<int>(r % 3), 1.0, 1};
  const auto before = aug;
  const auto flipped = corrupt_pseudo_labels(aug, 3, 0.2, 7);
  std::size_t changed = 0;
  for (const auto& [r, p] : aug.pseudo_labels) changed += p.label != before.pseudo_labels.at(r).label;
  CHECK(changed == flipped);
  CHECK(static_cast<double>(changed) / 5000.0 == Approx(0.2).margin(0.02));
}

TEST_CASE("experiment reports are reproducible and self-consistent", "[pipeline]") {
  const auto ds = quick_data();
  auto cfg = quick_config();
  const auto a = run_experiment(ds, cfg);
  cfg.workers = 2;
  const auto b = run_experiment(ds, cfg);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.completed() == 2);

  std::vector<double> acc;
  for (const auto& t : a.trials) acc.push_back(t.acc_u);
  const auto s = summarize(acc);
  const auto j = to_json(a);
  CHECK(j["aggregate"]["acc_u"]["mean"].get<double>() == Approx(s.mean));
  CHECK(j["aggregate"]["acc_u"]["std"].get<double>() == Approx(s.stddev));
  for (const auto& t : a.trials) CHECK(t.subset.size() == j["trials"][t.trial]["size"].get<std::size_t>());
}

TEST_CASE("single-trial aggregate equals the trial", "[pipeline]") {
  auto cfg = quick_config();
  cfg.trials = 1;
  const auto r = run_experiment(quick_data(), cfg);
  CHECK(r.summary("acc_u").mean == r.trials[0].acc_u);
  CHECK(r.summary("acc_u").stddev == 0.0);
}

TEST_CASE("timed-out trials are NA", "[pipeline]") {
  auto cfg = quick_config();
  cfg.time_limit = 1e-9;
  const auto r = run_experiment(quick_data(), cfg);
  CHECK(r.completed() == 0);
  const auto j = to_json(r);
  CHECK(j["aggregate"]["acc_u"]["count"] == 0);
  CHECK(j["aggregate"]["acc_u"]["mean"].is_null());
  for (const auto& t : j["trials"]) CHECK(t["status"] == "NA");
  std::ostringstream csv;
  write_csv(r, csv);
  CHECK(csv.str().find(",0,NA,NA,NA,NA,NA,") != std::string::npos);
}

TEST_CASE("config JSON round trip", "[pipeline]") {
  auto cfg = quick_config();
  cfg.ga.scheme = Scheme::Cga;
  cfg.criterion = Criterion::Oob;
  cfg.forest.max_depth = 7;
  cfg.source.synthetic.dimension = 33;
  const auto back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.forest.max_depth == 7u);
  nlohmann::json bad = to_json(cfg);
  bad["version"] = 99;
  CHECK_THROWS(config_from_json(bad));
  bad = to_json(cfg);
  bad["trials"] = 0;
  CHECK_THROWS(config_from_json(bad));
}

TEST_CASE("subset files", "[pipeline]") {
  std::stringstream io;
  write_subset_file(io, FeatureSubset({4, 0, 9}), "00ff00ff00ff00ff");
  CHECK(io.str() == "# dataset 00ff00ff00ff00ff\n0\n4\n9\n");
  const auto back = read_subset_file(io);
  CHECK(back.dataset_hash == "00ff00ff00ff00ff");
  CHECK(back.subset == FeatureSubset({0, 4, 9}));
  std::istringstream bad("# dataset x\n1\n-2\n");
  CHECK_THROWS(read_subset_file(bad));
  std::istringstream dup("1\n1\n");
  CHECK_THROWS(read_subset_file(dup));
}

TEST_CASE("significance flags", "[pipeline]") {
  SelectionReport good, bad, close;
  for (std::size_t t = 0; t < 20; ++t) {
    TrialRecord r;
    r.trial = t;
    r.completed = true;
    r.subset = FeatureSubset({0});
    r.acc_u = 0.9 + 0.001 * static_cast<double>(t);
    good.trials.push_back(r);
    r.acc_u = 0.5 + 0.001 * static_cast<double>(t);
    bad.trials.push_back(r);
    r.acc_u = 0.9 + 0.001 * static_cast<double>((t + 3) % 20);
    close.trials.push_back(r);
  }
  const auto flags = significantly_worse({good, bad, close}, "acc_u");
  CHECK(flags == std::vector<bool>{false, true, false});
}
