// Command-line front end: select, evaluate, compare-criteria, compare-search
// and synth.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sewil/sewil.hpp"

using namespace sewil;

namespace {

struct Options {
  std::string config_path;
  std::string data_path;
  std::string format = "csv";
  std::string label_column = "label";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> time_limit;
  std::optional<std::string> criterion;
  std::optional<std::string> scheme;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> trees;
  std::optional<std::size_t> generations;
  std::optional<std::size_t> population;
  std::string json_out;
  std::string csv_out;
  bool timings = false;
};

void add_common(CLI::App* cmd, Options& o, bool experiment = true) {
  cmd->add_option("--config", o.config_path, "Versioned JSON config file");
  cmd->add_option("--data", o.data_path, "Dataset file (synthetic source from config when omitted)");
  cmd->add_option("--format", o.format, "Dataset format")->check(CLI::IsMember({"csv", "libsvm"}));
  cmd->add_option("--label-column", o.label_column, "CSV label column name");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--workers", o.workers, "Concurrent trials / candidate evaluations");
  cmd->add_option("--trees", o.trees, "Trees per forest");
  if (!experiment) return;
  cmd->add_option("--trials", o.trials, "Number of random splits");
  cmd->add_option("--time-limit", o.time_limit, "Seconds per trial (<= 0 disables)");
  cmd->add_option("--criterion", o.criterion, "Fitness: OOB, CB or CBIL");
  cmd->add_option("--scheme", o.scheme, "Search scheme: CGA or FSGA");
  cmd->add_option("--generations", o.generations, "GA generations");
  cmd->add_option("--population", o.population, "GA population size");
  cmd->add_option("--json", o.json_out, "Write the JSON report here");
  cmd->add_option("--csv", o.csv_out, "Write per-trial CSV here");
  cmd->add_flag("--timings", o.timings, "Include wall-clock times in the JSON report");
}

ExperimentConfig build_config(const Options& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot open config '" + o.config_path + "'");
    cfg = config_from_json(nlohmann::json::parse(in));
  }
  if (!o.data_path.empty()) {
    cfg.source.kind = o.format == "libsvm" ? DataSource::Kind::Libsvm : DataSource::Kind::Csv;
    cfg.source.path = o.data_path;
    cfg.source.label_column = o.label_column;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.time_limit) cfg.time_limit = *o.time_limit;
  if (o.criterion) cfg.criterion = parse_criterion(*o.criterion);
  if (o.scheme) cfg.ga.scheme = parse_scheme(*o.scheme);
  if (o.workers) {
    cfg.workers = *o.workers;
    cfg.ga.workers = *o.workers;
  }
  if (o.trees) cfg.forest.tree_count = *o.trees;
  if (o.generations) cfg.ga.generations = *o.generations;
  if (o.population) {
    cfg.ga.population = *o.population;
    cfg.ga.parents = std::min(cfg.ga.parents, *o.population);
  }
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::string fmt(double v, int precision = 3) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

void emit(const std::vector<SelectionReport>& reports, const Options& o) {
  const auto worse = significantly_worse(reports, "acc_u");
  print_table(std::cout, reports, worse);
  if (!o.json_out.empty()) {
    nlohmann::json j;
    if (reports.size() == 1) {
      j = to_json(reports.front(), o.timings);
    } else {
      j = {{"format", "sewil-comparison"}, {"version", 1}, {"reports", nlohmann::json::array()}};
      for (std::size_t i = 0; i < reports.size(); ++i) {
        auto r = to_json(reports[i], o.timings);
        r["significantly_worse_acc_u"] = static_cast<bool>(worse[i]);
        j["reports"].push_back(std::move(r));
      }
    }
    write_text(o.json_out, j.dump(2) + "\n");
  }
  if (!o.csv_out.empty()) {
    std::ostringstream csv;
    for (std::size_t i = 0; i < reports.size(); ++i) write_csv(reports[i], csv, i == 0);
    write_text(o.csv_out, csv.str());
  }
}

int cmd_select(const Options& o, const std::string& subset_out) {
  const auto cfg = build_config(o);
  const auto ds = load_source(cfg.source);
  const auto report = run_experiment(ds, cfg);
  emit({report}, o);
  if (!subset_out.empty()) {
    // The subset of the first completed trial.
    for (const auto& t : report.trials) {
      if (!t.completed) continue;
      std::ofstream out(subset_out);
      write_subset_file(out, t.subset, report.dataset_hash);
      break;
    }
  }
  return report.completed() ? 0 : 2;
}

int cmd_evaluate(const Options& o, const std::string& subset_path) {
  auto cfg = build_config(o);
  const auto ds = load_source(cfg.source);
  std::ifstream in(subset_path);
  if (!in) throw std::runtime_error("cannot open subset file '" + subset_path + "'");
  const auto file = read_subset_file(in);
  const auto hash = dataset_hash(ds);
  if (!file.dataset_hash.empty() && file.dataset_hash != hash)
    std::cerr << "warning: subset file names dataset " << file.dataset_hash << ", loaded " << hash << "\n";
  file.subset.validate(ds.dimension());

  std::vector<double> acc_u, acc_t;
  nlohmann::json trials = nlohmann::json::array();
  std::vector<SelectionAccuracy> results(cfg.trials);
  parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
    const auto seed = derive_seed(cfg.seed, {t});
    const auto part = split(ds, cfg.ratios, derive_seed(seed, {0}));
    ForestConfig f = cfg.forest;
    f.seed = derive_seed(seed, {30});
    results[t] = evaluate_selection(part, file.subset, f, {cfg.sla_rounds, {}});
  });
  std::cout << "trial  ACC-U   ACC-T\n";
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    std::cout << std::left << std::setw(7) << t << std::setw(8) << fmt(results[t].acc_u) << fmt(results[t].acc_t)
              << "\n";
    if (!std::isnan(results[t].acc_u)) acc_u.push_back(results[t].acc_u);
    if (!std::isnan(results[t].acc_t)) acc_t.push_back(results[t].acc_t);
    trials.push_back({{"trial", t}, {"acc_u", detail::number_or_null(results[t].acc_u)},
                      {"acc_t", detail::number_or_null(results[t].acc_t)}});
  }
  const auto su = summarize(acc_u), st = summarize(acc_t);
  std::cout << "mean   " << fmt(su.count ? su.mean : NAN) << " +- " << fmt(su.stddev) << "   "
            << fmt(st.count ? st.mean : NAN) << " +- " << fmt(st.stddev) << "\n";
  if (!o.json_out.empty()) {
    const nlohmann::json j = {{"format", "sewil-evaluation"}, {"version", 1},
                              {"dataset_hash", hash},         {"subset", file.subset.indices()},
                              {"config", to_json(cfg)},       {"trials", trials}};
    write_text(o.json_out, j.dump(2) + "\n");
  }
  if (!o.csv_out.empty()) {
    std::ostringstream csv;
    csv << "trial,acc_u,acc_t\n";
    for (std::size_t t = 0; t < cfg.trials; ++t)
      csv << t << ',' << fmt(results[t].acc_u, 10) << ',' << fmt(results[t].acc_t, 10) << "\n";
    write_text(o.csv_out, csv.str());
  }
  return 0;
}

int cmd_compare_criteria(const Options& o, bool skip_gt, std::optional<double> corruption,
                         std::optional<std::size_t> subsets) {
  auto cfg = build_config(o);
  if (skip_gt) cfg.skip_gt = true;
  if (corruption) cfg.pseudo_label_noise = *corruption;
  if (subsets) cfg.comparison_subsets = *subsets;
  cfg.validate();
  const auto ds = load_source(cfg.source);

  std::vector<std::optional<ComparisonResult>> results(cfg.trials);
  const std::size_t trial_workers = std::max<std::size_t>(1, std::min(cfg.workers, cfg.trials));
  ExperimentConfig inner = cfg;
  inner.workers = std::max<std::size_t>(1, cfg.workers / trial_workers);
  parallel_for(cfg.trials, trial_workers, [&](std::size_t t) {
    const auto seed = derive_seed(cfg.seed, {t});
    try {
      const auto part = split(ds, cfg.ratios, derive_seed(seed, {0}));
      results[t] = criterion_comparison(part, inner, seed, Deadline::after(cfg.time_limit));
    } catch (const TimeLimitExceeded&) {
    }
  });

  const std::vector<std::string> names{"OOB", "CB", "CBIL", "GT"};
  std::vector<std::vector<double>> cols(4);
  nlohmann::json trials = nlohmann::json::array();
  std::ostringstream csv;
  csv << "trial,completed,OOB,CB,CBIL,GT,corrupted\n";
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto& r = results[t];
    if (!r) {
      trials.push_back({{"trial", t}, {"status", "NA"}});
      csv << t << ",0,NA,NA,NA,NA,NA\n";
      continue;
    }
    nlohmann::json jt = {{"trial", t}, {"corrupted", r->corrupted}, {"pseudo_labeled", r->pseudo_labeled}};
    csv << t << ",1";
    for (std::size_t c = 0; c < 3; ++c) {
      cols[c].push_back(r->picks[c].acc_u);
      jt[names[c]] = {{"acc_u", r->picks[c].acc_u},
                      {"subset", r->entries[r->picks[c].subset_index].subset.indices()}};
      csv << ',' << fmt(r->picks[c].acc_u, 10);
    }
    if (r->gt) {
      cols[3].push_back(*r->gt);
      jt["GT"] = *r->gt;
    }
    csv << ',' << (r->gt ? fmt(*r->gt, 10) : "NA") << ',' << r->corrupted << "\n";
    trials.push_back(std::move(jt));
  }

  std::cout << std::left << std::setw(8) << "crit" << "ACC-U\n";
  nlohmann::json agg;
  for (std::size_t c = 0; c < 4; ++c) {
    const auto s = summarize(cols[c]);
    std::cout << std::left << std::setw(8) << names[c]
              << (s.count ? fmt(s.mean) + " +- " + fmt(s.stddev) : std::string("NA")) << "\n";
    agg[names[c]] = s.count ? nlohmann::json{{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}}
                            : nlohmann::json{{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
  }
  if (!o.json_out.empty()) {
    const nlohmann::json j = {{"format", "sewil-criteria"}, {"version", 1},    {"dataset_hash", dataset_hash(ds)},
                              {"config", to_json(cfg)},     {"trials", trials}, {"aggregate", agg}};
    write_text(o.json_out, j.dump(2) + "\n");
  }
  if (!o.csv_out.empty()) write_text(o.csv_out, csv.str());
  return 0;
}

int cmd_compare_search(const Options& o) {
  auto cfg = build_config(o);
  const auto ds = load_source(cfg.source);
  std::vector<SelectionReport> reports;
  for (Scheme s : {Scheme::Cga, Scheme::Fsga}) {
    cfg.ga.scheme = s;
    reports.push_back(run_experiment(ds, cfg));
  }
  emit(reports, o);
  return 0;
}

int cmd_synth(SyntheticSpec spec, const std::string& out_path, const std::string& meta_path) {
  const auto s = generate_synthetic(spec);
  std::stringstream csv;
  write_csv(s.data, csv);
  if (out_path.empty() || out_path == "-") {
    std::cout << csv.str();
  } else {
    write_text(out_path, csv.str());
  }
  // Loading renumbers labels by first appearance, so report the hash a
  // reader of the file will see.
  const auto hash = dataset_hash(load_csv(csv, "label"));
  if (!meta_path.empty()) {
    auto meta = metadata_json(s);
    meta["dataset_hash"] = hash;
    write_text(meta_path, meta.dump(2) + "\n");
  }
  std::cerr << "dataset " << hash << ": n=" << spec.n << " d=" << spec.dimension
            << " informative=" << spec.informative << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised wrapper feature selection with imperfect labels"};
  app.require_subcommand(1);

  Options sel_o, eval_o, crit_o, search_o;
  std::string subset_out, subset_in;
  bool skip_gt = false;
  std::optional<double> corruption;
  std::optional<std::size_t> subsets;

  auto* sel = app.add_subcommand("select", "Select features on random splits and report accuracies");
  add_common(sel, sel_o);
  sel->add_option("--subset-out", subset_out, "Write the first completed trial's subset here");

  auto* eval = app.add_subcommand("evaluate", "ACC-U / ACC-T of a fixed subset over random splits");
  add_common(eval, eval_o, false);
  eval->add_option("--subset", subset_in, "Subset file")->required();
  eval->add_option("--trials", eval_o.trials, "Number of random splits");
  eval->add_option("--json", eval_o.json_out, "Write the JSON report here");
  eval->add_option("--csv", eval_o.csv_out, "Write per-trial CSV here");

  auto* crit = app.add_subcommand("compare-criteria", "OOB vs CB vs CBIL on random subset pools");
  add_common(crit, crit_o);
  crit->add_flag("--skip-gt", skip_gt, "Skip end-to-end evaluation of the whole pool");
  crit->add_option("--corrupt-pseudo-labels", corruption, "Fraction of pseudo-labels to flip");
  crit->add_option("--subsets", subsets, "Pool size");

  auto* search = app.add_subcommand("compare-search", "CGA vs FSGA with Mann-Whitney flags");
  add_common(search, search_o);

  SyntheticSpec spec;
  std::string synth_out, synth_meta;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset as CSV");
  synth->add_option("--n", spec.n, "Rows");
  synth->add_option("--dimension", spec.dimension, "Features");
  synth->add_option("--informative", spec.informative, "Informative features");
  synth->add_option("--classes", spec.classes, "Classes");
  synth->add_option("--noise", spec.noise, "Label flip probability");
  synth->add_option("--margin", spec.margin, "Minimum distance from the decision boundary");
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_option("--out", synth_out, "CSV output ('-' for stdout)");
  synth->add_option("--meta", synth_meta, "JSON sidecar with the informative features");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sel) return cmd_select(sel_o, subset_out);
    if (*eval) return cmd_evaluate(eval_o, subset_in);
    if (*crit) return cmd_compare_criteria(crit_o, skip_gt, corruption, subsets);
    if (*search) return cmd_compare_search(search_o);
    if (*synth) return cmd_synth(spec, synth_out, synth_meta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
