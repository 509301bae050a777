#pragma once

// End-to-end orchestration: self-learning augmentation, mislabeling
// estimation, bound-driven genetic search, evaluation of the selected
// subset, the multi-trial protocol and its reports.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sewil/bounds.hpp"
#include "sewil/common.hpp"
#include "sewil/dataset.hpp"
#include "sewil/forest.hpp"
#include "sewil/genetic.hpp"
#include "sewil/parallel.hpp"
#include "sewil/selflearn.hpp"
#include "sewil/stats.hpp"

namespace sewil {

// ---------------------------------------------------------------------------
// Configuration

struct DataSource {
  enum class Kind { Synthetic, Csv, Libsvm };
  Kind kind = Kind::Synthetic;
  std::string path;
  std::string label_column = "label";
  CsvOptions csv;
  SyntheticSpec synthetic;
};

/// Which rows the fitness forest is trained and scored on.
enum class FitnessPool { Augmented, LabeledOnly };

struct ExperimentConfig {
  DataSource source;
  SplitRatios ratios;
  std::size_t trials = 20;
  ForestConfig forest;
  GaConfig ga;
  Criterion criterion = Criterion::CBoundIL;
  GammaMode gamma_mode = GammaMode::Fixed;
  FitnessPool fitness_pool = FitnessPool::Augmented;
  double smoothing = 1.0;
  std::size_t sla_rounds = 10;
  double time_limit = 3600.0;  // seconds per trial; <= 0 disables
  std::uint64_t seed = 0;
  std::size_t workers = 1;     // concurrent trials
  // criterion comparison
  std::size_t comparison_subsets = 40;
  bool skip_gt = false;
  double pseudo_label_noise = 0.0;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (!(smoothing >= 0.0)) throw std::invalid_argument("config: smoothing must be >= 0");
    if (comparison_subsets < 1) throw std::invalid_argument("config: comparison_subsets must be >= 1");
    if (!(pseudo_label_noise >= 0.0 && pseudo_label_noise <= 1.0))
      throw std::invalid_argument("config: pseudo_label_noise must lie in [0, 1]");
    forest.validate();
    ga.validate();
  }
};

inline constexpr int kConfigVersion = 1;

/// Serializes everything that influences results. Worker counts are left out
/// so reports do not depend on them.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json src;
  switch (c.source.kind) {
    case DataSource::Kind::Synthetic: {
      const auto& s = c.source.synthetic;
      src = {{"kind", "synthetic"}, {"n", s.n}, {"dimension", s.dimension}, {"informative", s.informative},
             {"classes", s.classes}, {"noise", s.noise}, {"margin", s.margin}, {"seed", s.seed}};
      break;
    }
    case DataSource::Kind::Csv:
      src = {{"kind", "csv"}, {"path", c.source.path}, {"label_column", c.source.label_column},
             {"delimiter", std::string(1, c.source.csv.delimiter)}, {"header", c.source.csv.header}};
      break;
    case DataSource::Kind::Libsvm:
      src = {{"kind", "libsvm"}, {"path", c.source.path}};
      break;
  }
  nlohmann::json forest = {{"tree_count", c.forest.tree_count},
                           {"min_leaf", c.forest.min_leaf},
                           {"bootstrap", c.forest.bootstrap}};
  forest["max_depth"] = c.forest.max_depth ? nlohmann::json(*c.forest.max_depth) : nlohmann::json();
  forest["features_per_split"] =
      c.forest.features_per_split ? nlohmann::json(*c.forest.features_per_split) : nlohmann::json();
  nlohmann::json ga = {{"generations", c.ga.generations},
                       {"population", c.ga.population},
                       {"parents", c.ga.parents},
                       {"mutation_rate", c.ga.mutation_rate},
                       {"length_mutation", c.ga.length_mutation},
                       {"shadow_epsilon", c.ga.shadow_epsilon},
                       {"final_vote_fraction", c.ga.final_vote_fraction},
                       {"scheme", to_string(c.ga.scheme)}};
  ga["theta_out"] = c.ga.theta_out ? nlohmann::json(*c.ga.theta_out) : nlohmann::json();
  return {{"version", kConfigVersion},
          {"source", src},
          {"ratios", {c.ratios.labeled, c.ratios.unlabeled, c.ratios.test}},
          {"trials", c.trials},
          {"forest", forest},
          {"ga", ga},
          {"criterion", to_string(c.criterion)},
          {"gamma_mode", to_string(c.gamma_mode)},
          {"fitness_pool", c.fitness_pool == FitnessPool::Augmented ? "augmented" : "labeled"},
          {"smoothing", c.smoothing},
          {"sla_rounds", c.sla_rounds},
          {"time_limit", c.time_limit},
          {"seed", c.seed},
          {"comparison_subsets", c.comparison_subsets},
          {"skip_gt", c.skip_gt},
          {"pseudo_label_noise", c.pseudo_label_noise}};
}

/// Reads a versioned config document. Missing keys keep their defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  if (j.value("version", kConfigVersion) != kConfigVersion)
    throw std::runtime_error("unsupported config version");
  auto opt_size = [](const nlohmann::json& v) -> std::optional<std::size_t> {
    if (v.is_null()) return std::nullopt;
    return v.get<std::size_t>();
  };
  if (j.contains("source")) {
    const auto& s = j["source"];
    const std::string kind = s.value("kind", "synthetic");
    if (kind == "synthetic") {
      c.source.kind = DataSource::Kind::Synthetic;
      auto& sp = c.source.synthetic;
      sp.n = s.value("n", sp.n);
      sp.dimension = s.value("dimension", sp.dimension);
      sp.informative = s.value("informative", sp.informative);
      sp.classes = s.value("classes", sp.classes);
      sp.noise = s.value("noise", sp.noise);
      sp.margin = s.value("margin", sp.margin);
      sp.seed = s.value("seed", sp.seed);
    } else if (kind == "csv") {
      c.source.kind = DataSource::Kind::Csv;
      c.source.path = s.at("path");
      c.source.label_column = s.value("label_column", c.source.label_column);
      const std::string delim = s.value("delimiter", std::string(","));
      if (delim.size() != 1) throw std::runtime_error("config: delimiter must be one character");
      c.source.csv.delimiter = delim[0];
      c.source.csv.header = s.value("header", true);
    } else if (kind == "libsvm") {
      c.source.kind = DataSource::Kind::Libsvm;
      c.source.path = s.at("path");
    } else {
      throw std::runtime_error("config: unknown source kind '" + kind + "'");
    }
  }
  if (j.contains("ratios")) {
    const auto r = j["ratios"].get<std::vector<double>>();
    if (r.size() != 3) throw std::runtime_error("config: ratios needs three values");
    c.ratios = {r[0], r[1], r[2]};
  }
  c.trials = j.value("trials", c.trials);
  if (j.contains("forest")) {
    const auto& f = j["forest"];
    c.forest.tree_count = f.value("tree_count", c.forest.tree_count);
    c.forest.min_leaf = f.value("min_leaf", c.forest.min_leaf);
    c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
    if (f.contains("max_depth")) c.forest.max_depth = opt_size(f["max_depth"]);
    if (f.contains("features_per_split")) c.forest.features_per_split = opt_size(f["features_per_split"]);
  }
  if (j.contains("ga")) {
    const auto& g = j["ga"];
    c.ga.generations = g.value("generations", c.ga.generations);
    c.ga.population = g.value("population", c.ga.population);
    c.ga.parents = g.value("parents", c.ga.parents);
    c.ga.mutation_rate = g.value("mutation_rate", c.ga.mutation_rate);
    if (g.contains("length_mutation")) c.ga.length_mutation = g["length_mutation"].get<std::array<double, 3>>();
    c.ga.shadow_epsilon = g.value("shadow_epsilon", c.ga.shadow_epsilon);
    c.ga.final_vote_fraction = g.value("final_vote_fraction", c.ga.final_vote_fraction);
    if (g.contains("scheme")) c.ga.scheme = parse_scheme(g["scheme"]);
    if (g.contains("theta_out") && !g["theta_out"].is_null()) c.ga.theta_out = g["theta_out"].get<double>();
  }
  if (j.contains("criterion")) c.criterion = parse_criterion(j["criterion"]);
  if (j.contains("gamma_mode")) c.gamma_mode = parse_gamma_mode(j["gamma_mode"]);
  if (j.contains("fitness_pool"))
    c.fitness_pool = j["fitness_pool"] == "labeled" ? FitnessPool::LabeledOnly : FitnessPool::Augmented;
  c.smoothing = j.value("smoothing", c.smoothing);
  c.sla_rounds = j.value("sla_rounds", c.sla_rounds);
  c.time_limit = j.value("time_limit", c.time_limit);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  c.comparison_subsets = j.value("comparison_subsets", c.comparison_subsets);
  c.skip_gt = j.value("skip_gt", c.skip_gt);
  c.pseudo_label_noise = j.value("pseudo_label_noise", c.pseudo_label_noise);
  c.validate();
  return c;
}

inline PartitionedDataset load_source(const DataSource& src) {
  switch (src.kind) {
    case DataSource::Kind::Csv: return load_csv(src.path, src.label_column, src.csv);
    case DataSource::Kind::Libsvm: return load_libsvm(src.path);
    case DataSource::Kind::Synthetic: return generate_synthetic(src.synthetic).data;
  }
  throw std::logic_error("unknown data source");
}

// ---------------------------------------------------------------------------
// Selection and evaluation

struct SelectOutcome {
  FeatureSubset subset;
  MislabelingMatrix mislabeling;
  double gamma = 1.0;
  std::size_t pseudo_labeled = 0;
  std::vector<SlaRound> sla_trace;
  GaResult ga;
};

/// Mislabeling matrix of a forest fitted on the labeled rows, from its
/// out-of-bag predictions.
inline MislabelingMatrix estimate_labeled_mislabeling(const PartitionedDataset& ds, const ForestConfig& fcfg,
                                                      double smoothing, const Deadline& deadline = {}) {
  const auto rows = ds.rows_in(Partition::Labeled);
  std::vector<int> y;
  for (std::size_t r : rows) y.push_back(ds.observed[r]);
  const Matrix x = ds.features.gather_rows(rows);
  const Forest forest = fit(x, y, ds.class_count, fcfg, deadline);
  const OobVotes oob = oob_votes(forest, x);
  return estimate_mislabeling(y, oob.votes.argmax(), ds.class_count, smoothing, oob.covered);
}

/// Augments with self-learning, estimates gamma on the labeled rows and runs
/// the genetic search with the configured criterion as fitness.
inline SelectOutcome sewil_select(const PartitionedDataset& ds, const ExperimentConfig& cfg, std::uint64_t seed,
                                  const Deadline& deadline = {}) {
  if (ds.rows_in(Partition::Labeled).empty()) throw std::invalid_argument("select: no labeled rows");
  SelectOutcome out;

  ForestConfig sla_cfg = cfg.forest;
  sla_cfg.seed = derive_seed(seed, {10});
  const SlaResult aug = sla(ds, sla_cfg, {cfg.sla_rounds, deadline});
  out.pseudo_labeled = aug.augmented.pseudo_labels.size();
  out.sla_trace = aug.augmented.trace;

  ForestConfig lab_cfg = cfg.forest;
  lab_cfg.seed = derive_seed(seed, {11});
  out.mislabeling = estimate_labeled_mislabeling(ds, lab_cfg, cfg.smoothing, deadline);
  out.gamma = gamma(out.mislabeling);

  EvaluationContext ctx =
      make_context(ds, cfg.fitness_pool == FitnessPool::Augmented ? aug.augmented : AugmentedSet{}, cfg.forest);
  ctx.criterion = cfg.criterion;
  ctx.gamma_mode = cfg.gamma_mode;
  ctx.gamma = out.gamma;
  ctx.smoothing = cfg.smoothing;
  ctx.deadline = deadline;

  GaConfig ga = cfg.ga;
  ga.seed = derive_seed(seed, {12});
  out.ga = run(ctx, ga);
  out.subset = out.ga.subset;
  return out;
}

struct SelectionAccuracy {
  double acc_u = std::numeric_limits<double>::quiet_NaN();  // NaN when the partition is empty
  double acc_t = std::numeric_limits<double>::quiet_NaN();
};

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

/// Self-learning on the projected data; ACC-U scores the final forest on the
/// unlabeled rows against their hidden truth, ACC-T on the test rows.
inline SelectionAccuracy evaluate_selection(const PartitionedDataset& ds, const FeatureSubset& subset,
                                            const ForestConfig& fcfg, const SlaOptions& opts = {}) {
  const PartitionedDataset projected = project(ds, subset);
  const SlaResult result = sla(projected, fcfg, opts);
  SelectionAccuracy acc;
  for (Partition p : {Partition::Unlabeled, Partition::Test}) {
    const auto rows = projected.rows_in(p);
    std::vector<int> truth;
    for (std::size_t r : rows) truth.push_back(projected.truth[r]);
    const auto pred = predict(result.forest, projected.features.gather_rows(rows), fcfg.workers);
    (p == Partition::Unlabeled ? acc.acc_u : acc.acc_t) = accuracy(pred, truth);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Criterion comparison

struct CriterionPick {
  Criterion criterion;
  std::size_t subset_index = 0;
  double acc_u = std::numeric_limits<double>::quiet_NaN();
};

struct ComparisonEntry {
  FeatureSubset subset;
  SubsetScore score;
  std::optional<double> acc_u;  // end-to-end accuracy, absent with skip_gt
};

struct ComparisonResult {
  std::vector<ComparisonEntry> entries;
  std::vector<CriterionPick> picks;  // OOB, CB, CBIL
  std::optional<double> gt;          // best accuracy over the pool
  std::size_t pseudo_labeled = 0;
  std::size_t corrupted = 0;
};

/// Flips each pseudo-label to a uniformly drawn different class with
/// probability `rate`. Returns the number flipped.
inline std::size_t corrupt_pseudo_labels(AugmentedSet& aug, std::size_t classes, double rate, std::uint64_t seed) {
  if (rate <= 0.0 || classes < 2) return 0;
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other(0, classes - 2);
  std::size_t flipped = 0;
  for (auto& [row, pl] : aug.pseudo_labels) {
    if (!(unit(rng) < rate)) continue;
    const auto o = static_cast<int>(other(rng));
    pl.label = o >= pl.label ? o + 1 : o;
    ++flipped;
  }
  return flipped;
}

/// Scores a pool of random floor(sqrt(d))-sized subsets with every criterion
/// on the augmented set and reports the end-to-end accuracy of each
/// criterion's minimizer next to the best accuracy in the pool. Gamma is
/// estimated per subset from the out-of-bag predictions on labeled rows.
inline ComparisonResult criterion_comparison(const PartitionedDataset& ds, const ExperimentConfig& cfg,
                                             std::uint64_t seed, const Deadline& deadline = {}) {
  ComparisonResult out;
  ForestConfig sla_cfg = cfg.forest;
  sla_cfg.seed = derive_seed(seed, {20});
  SlaResult aug = sla(ds, sla_cfg, {cfg.sla_rounds, deadline});
  out.pseudo_labeled = aug.augmented.pseudo_labels.size();
  out.corrupted =
      corrupt_pseudo_labels(aug.augmented, ds.class_count, cfg.pseudo_label_noise, derive_seed(seed, {21}));

  EvaluationContext ctx = make_context(ds, aug.augmented, cfg.forest);
  ctx.gamma_mode = GammaMode::PerSubset;
  ctx.smoothing = cfg.smoothing;
  ctx.deadline = deadline;

  GaConfig pool_cfg = cfg.ga;
  pool_cfg.population = cfg.comparison_subsets;
  pool_cfg.seed = derive_seed(seed, {22});
  const auto pool = init_population(ds.dimension(), pool_cfg);
  out.entries.resize(pool.size());
  parallel_for(pool.size(), cfg.workers, [&](std::size_t i) {
    out.entries[i].subset = pool[i].subset;
    out.entries[i].score = score_subset(ctx, pool[i].subset, derive_seed(seed, {23, i}));
  });

  ForestConfig eval_cfg = cfg.forest;
  eval_cfg.seed = derive_seed(seed, {24});
  auto end_to_end = [&](std::size_t i) {
    if (!out.entries[i].acc_u)
      out.entries[i].acc_u = evaluate_selection(ds, out.entries[i].subset, eval_cfg, {cfg.sla_rounds, deadline}).acc_u;
  };

  for (Criterion c : {Criterion::Oob, Criterion::CBound, Criterion::CBoundIL}) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.entries.size(); ++i)
      if (out.entries[i].score.value(c) < out.entries[best].score.value(c)) best = i;
    out.picks.push_back({c, best, 0.0});
  }
  if (!cfg.skip_gt) {
    parallel_for(out.entries.size(), cfg.workers, end_to_end);
    double gt = -1.0;
    for (const auto& e : out.entries) gt = std::max(gt, *e.acc_u);
    out.gt = gt;
  } else {
    for (const auto& p : out.picks) end_to_end(p.subset_index);
  }
  for (auto& p : out.picks) p.acc_u = *out.entries[p.subset_index].acc_u;
  return out;
}

// ---------------------------------------------------------------------------
// Multi-trial protocol and reports

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool completed = false;
  FeatureSubset subset;
  double acc_u = std::numeric_limits<double>::quiet_NaN();
  double acc_t = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double fitness = std::numeric_limits<double>::quiet_NaN();
  std::size_t pseudo_labeled = 0;
  std::size_t removed = 0;
  std::vector<GenerationRecord> trace;
  std::vector<SlaRound> sla_trace;
};

struct SelectionReport {
  std::string method;
  std::string dataset_hash;
  nlohmann::json config;
  std::vector<TrialRecord> trials;

  std::size_t completed() const {
    return static_cast<std::size_t>(
        std::count_if(trials.begin(), trials.end(), [](const TrialRecord& t) { return t.completed; }));
  }

  std::vector<double> values(const std::string& metric) const {
    std::vector<double> v;
    for (const auto& t : trials) {
      if (!t.completed) continue;
      if (metric == "acc_u") v.push_back(t.acc_u);
      else if (metric == "acc_t") v.push_back(t.acc_t);
      else if (metric == "size") v.push_back(static_cast<double>(t.subset.size()));
      else if (metric == "fitness") v.push_back(t.fitness);
      else if (metric == "gamma") v.push_back(t.gamma);
      else throw std::invalid_argument("unknown metric '" + metric + "'");
    }
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    return v;
  }

  Summary summary(const std::string& metric) const { return summarize(values(metric)); }
};

inline const std::vector<std::string>& report_metrics() {
  static const std::vector<std::string> m{"acc_u", "acc_t", "size", "fitness", "gamma"};
  return m;
}

namespace detail {
inline nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); }
}  // namespace detail

/// Deterministic JSON form. Wall-clock times are included only on request.
inline nlohmann::json to_json(const SelectionReport& r, bool include_timings = false) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json j = {{"trial", t.trial}, {"seed", t.seed}, {"completed", t.completed}};
    if (t.completed) {
      j["subset"] = t.subset.indices();
      j["size"] = t.subset.size();
      j["acc_u"] = detail::number_or_null(t.acc_u);
      j["acc_t"] = detail::number_or_null(t.acc_t);
      j["gamma"] = detail::number_or_null(t.gamma);
      j["fitness"] = detail::number_or_null(t.fitness);
      j["pseudo_labeled"] = t.pseudo_labeled;
      j["removed"] = t.removed;
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& g : t.trace) trace.push_back(to_json(g));
      j["generations"] = trace;
      nlohmann::json sla_trace = nlohmann::json::array();
      for (const auto& s : t.sla_trace) sla_trace.push_back(to_json(s));
      j["sla_rounds"] = sla_trace;
    } else {
      j["status"] = "NA";
    }
    if (include_timings) j["wall_seconds"] = t.wall_seconds;
    trials.push_back(std::move(j));
  }
  nlohmann::json agg = {{"completed", r.completed()}, {"trials", r.trials.size()}};
  for (const auto& m : report_metrics()) {
    const Summary s = r.summary(m);
    agg[m] = s.count ? nlohmann::json{{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}}
                     : nlohmann::json{{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
  }
  return {{"format", "sewil-report"}, {"version", 1},       {"method", r.method},
          {"dataset_hash", r.dataset_hash}, {"config", r.config}, {"trials", trials},
          {"aggregate", agg}};
}

inline void write_csv(const SelectionReport& r, std::ostream& out, bool header = true) {
  if (header) out << "method,trial,seed,completed,size,acc_u,acc_t,gamma,fitness,wall_seconds,subset\n";
  auto num = [](double v) {
    if (std::isnan(v)) return std::string("NA");
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
  };
  for (const auto& t : r.trials) {
    out << r.method << ',' << t.trial << ',' << t.seed << ',' << (t.completed ? 1 : 0) << ',';
    if (t.completed) {
      out << t.subset.size() << ',' << num(t.acc_u) << ',' << num(t.acc_t) << ',' << num(t.gamma) << ','
          << num(t.fitness) << ',';
    } else {
      out << "NA,NA,NA,NA,NA,";
    }
    out << num(t.wall_seconds) << ',';
    bool first = true;
    for (std::size_t f : t.subset) {
      out << (first ? "" : ";") << f;
      first = false;
    }
    out << '\n';
  }
}

/// Two-sided Mann-Whitney flags: entry i is set when report i's metric is
/// significantly below the report with the best mean at level `alpha`.
inline std::vector<bool> significantly_worse(const std::vector<SelectionReport>& reports, const std::string& metric,
                                             double alpha = 0.01) {
  std::vector<bool> flags(reports.size(), false);
  std::size_t best = reports.size();
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const Summary s = reports[i].summary(metric);
    if (s.count && s.mean > best_mean) {
      best_mean = s.mean;
      best = i;
    }
  }
  if (best == reports.size()) return flags;
  const auto ref = reports[best].values(metric);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i == best) continue;
    const auto v = reports[i].values(metric);
    if (v.empty()) continue;
    const auto test = mann_whitney_u(v, ref);
    flags[i] = test.p_value < alpha && summarize(v).mean < best_mean;
  }
  return flags;
}

inline void print_table(std::ostream& out, const std::vector<SelectionReport>& reports,
                        const std::vector<bool>& worse_acc_u = {}) {
  auto cell = [](const Summary& s, int precision) {
    if (!s.count) return std::string("NA");
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << s.mean << " +- " << s.stddev;
    return os.str();
  };
  out << std::left << std::setw(8) << "method" << std::setw(12) << "completed" << std::setw(22) << "ACC-U"
      << std::setw(22) << "ACC-T" << std::setw(18) << "d'" << '\n';
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::string acc_u = cell(r.summary("acc_u"), 3);
    if (i < worse_acc_u.size() && worse_acc_u[i]) acc_u += " (worse)";
    out << std::left << std::setw(8) << r.method << std::setw(12)
        << (std::to_string(r.completed()) + "/" + std::to_string(r.trials.size())) << std::setw(22) << acc_u
        << std::setw(22) << cell(r.summary("acc_t"), 3) << std::setw(18) << cell(r.summary("size"), 1) << '\n';
  }
}

/// Runs cfg.trials independent trials: split, select, evaluate. A trial that
/// exceeds cfg.time_limit is recorded as NA. Trial t uses the split and
/// search streams derived from (cfg.seed, t), so the report does not depend
/// on cfg.workers.
inline SelectionReport run_experiment(const PartitionedDataset& ds, const ExperimentConfig& cfg) {
  cfg.validate();
  SelectionReport report;
  report.method = to_string(cfg.ga.scheme);
  report.dataset_hash = dataset_hash(ds);
  report.config = to_json(cfg);
  report.trials.resize(cfg.trials);

  const std::size_t trial_workers = std::max<std::size_t>(1, std::min(cfg.workers, cfg.trials));
  parallel_for(cfg.trials, trial_workers, [&](std::size_t t) {
    TrialRecord& rec = report.trials[t];
    rec.trial = t;
    rec.seed = derive_seed(cfg.seed, {t});
    const auto start = std::chrono::steady_clock::now();
    const Deadline deadline = Deadline::after(cfg.time_limit);
    try {
      const PartitionedDataset part = split(ds, cfg.ratios, derive_seed(rec.seed, {0}));
      const SelectOutcome sel = sewil_select(part, cfg, rec.seed, deadline);
      ForestConfig eval_cfg = cfg.forest;
      eval_cfg.seed = derive_seed(rec.seed, {30});
      const SelectionAccuracy acc = evaluate_selection(part, sel.subset, eval_cfg, {cfg.sla_rounds, deadline});
      rec.completed = true;
      rec.subset = sel.subset;
      rec.acc_u = acc.acc_u;
      rec.acc_t = acc.acc_t;
      rec.gamma = sel.gamma;
      rec.fitness = sel.ga.best.fitness.value_or(std::numeric_limits<double>::quiet_NaN());
      rec.pseudo_labeled = sel.pseudo_labeled;
      rec.removed = sel.ga.removed.size();
      rec.trace = sel.ga.trace;
      rec.sla_trace = sel.sla_trace;
    } catch (const TimeLimitExceeded&) {
      rec.completed = false;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return report;
}

// ---------------------------------------------------------------------------
// Subset files: "# dataset <hash>" then one zero-based index per line.

inline void write_subset_file(std::ostream& out, const FeatureSubset& subset, const std::string& hash) {
  out << "# dataset " << hash << '\n';
  for (std::size_t f : subset) out << f << '\n';
}

struct SubsetFile {
  std::string dataset_hash;
  FeatureSubset subset;
};

inline SubsetFile read_subset_file(std::istream& in) {
  SubsetFile out;
  std::string line;
  std::vector<std::size_t> idx;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      std::istringstream is{std::string(t.substr(1))};
      std::string key, value;
      if (is >> key >> value && key == "dataset") out.dataset_hash = value;
      continue;
    }
    double v = 0;
    if (!detail::parse_finite(t, v) || v < 0 || v != std::floor(v))
      throw std::runtime_error("subset file line " + std::to_string(line_no) + ": not a feature index");
    idx.push_back(static_cast<std::size_t>(v));
  }
  out.subset = FeatureSubset(std::move(idx));
  return out;
}

}  // namespace sewil
