#pragma once

// Genetic search over feature subsets. Two schemes share the loop:
//   CGA  - single-point crossover on membership vectors + per-gene flips;
//   FSGA - weight-ordered crossover, swap and length mutation, a shadow-feature
//          relevance test that removes features for good, and a final vote.
// Fitness is minimized.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sewil/bounds.hpp"
#include "sewil/common.hpp"
#include "sewil/dataset.hpp"
#include "sewil/forest.hpp"
#include "sewil/parallel.hpp"
#include "sewil/selflearn.hpp"

namespace sewil {

enum class Scheme { Cga, Fsga };
enum class Criterion { Oob, CBound, CBoundIL };
enum class GammaMode { Fixed, PerSubset };

inline const char* to_string(Scheme s) { return s == Scheme::Cga ? "CGA" : "FSGA"; }
inline const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::Oob: return "OOB";
    case Criterion::CBound: return "CB";
    case Criterion::CBoundIL: return "CBIL";
  }
  return "?";
}
inline const char* to_string(GammaMode g) { return g == GammaMode::Fixed ? "fixed" : "per-subset"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "CGA" || s == "cga") return Scheme::Cga;
  if (s == "FSGA" || s == "fsga") return Scheme::Fsga;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}
inline Criterion parse_criterion(const std::string& s) {
  if (s == "OOB" || s == "oob") return Criterion::Oob;
  if (s == "CB" || s == "cb") return Criterion::CBound;
  if (s == "CBIL" || s == "cbil") return Criterion::CBoundIL;
  throw std::invalid_argument("unknown criterion '" + s + "'");
}
inline GammaMode parse_gamma_mode(const std::string& s) {
  if (s == "fixed") return GammaMode::Fixed;
  if (s == "per-subset") return GammaMode::PerSubset;
  throw std::invalid_argument("unknown gamma mode '" + s + "'");
}

struct GaConfig {
  std::size_t generations = 20;
  std::size_t population = 40;
  std::size_t parents = 8;
  double mutation_rate = 0.05;
  /// Probabilities of a length change of -1, 0, +1.
  std::array<double, 3> length_mutation{0.2, 0.6, 0.2};
  /// Suspicion threshold on average weights; 0.5 / d when empty.
  std::optional<double> theta_out;
  /// A suspicious feature survives only if its weight exceeds its shadow's by more than this.
  double shadow_epsilon = 0.0;
  double final_vote_fraction = 0.5;
  Scheme scheme = Scheme::Fsga;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    if (generations < 1) throw std::invalid_argument("ga: generations must be >= 1");
    if (population < 1) throw std::invalid_argument("ga: population must be >= 1");
    if (parents < 1 || parents > population)
      throw std::invalid_argument("ga: parents must lie in [1, population]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
      throw std::invalid_argument("ga: mutation_rate must lie in [0, 1]");
    double total = 0.0;
    for (double p : length_mutation) {
      if (!(p >= 0.0)) throw std::invalid_argument("ga: negative length-mutation probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("ga: length mutation must sum to 1");
    if (theta_out && !(*theta_out >= 0.0)) throw std::invalid_argument("ga: theta_out must be >= 0");
    if (!(final_vote_fraction >= 0.0 && final_vote_fraction <= 1.0))
      throw std::invalid_argument("ga: final_vote_fraction must lie in [0, 1]");
  }

  double theta_out_for(std::size_t dimension) const {
    return theta_out ? *theta_out : 0.5 / static_cast<double>(dimension);
  }
};

struct Candidate {
  FeatureSubset subset;
  std::optional<double> fitness;
  std::vector<double> weights;  // aligned with subset.indices(), sums to 1

  bool evaluated() const noexcept { return fitness.has_value(); }

  double weight_of(std::size_t feature) const {
    const auto& idx = subset.indices();
    const auto it = std::lower_bound(idx.begin(), idx.end(), feature);
    if (it == idx.end() || *it != feature || weights.empty()) return 0.0;
    return weights[static_cast<std::size_t>(it - idx.begin())];
  }

  /// Members ordered by decreasing weight, ties by index.
  std::vector<std::size_t> by_weight() const {
    std::vector<std::size_t> order(subset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double wa = weights.empty() ? 0.0 : weights[a];
      const double wb = weights.empty() ? 0.0 : weights[b];
      return wa > wb;
    });
    std::vector<std::size_t> out;
    out.reserve(order.size());
    for (std::size_t i : order) out.push_back(subset.indices()[i]);
    return out;
  }
};

struct RemovedFeature {
  std::size_t feature = 0;
  std::size_t generation = 0;
  double weight = 0.0;
  double shadow_weight = 0.0;
};

/// Features permanently excluded from the search.
class RemovedSet {
 public:
  RemovedSet() = default;
  explicit RemovedSet(std::size_t dimension) : mask_(dimension, false) {}

  bool contains(std::size_t f) const { return f < mask_.size() && mask_[f]; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t dimension() const noexcept { return mask_.size(); }
  const std::vector<RemovedFeature>& entries() const noexcept { return entries_; }

  void add(const RemovedFeature& r) {
    if (r.feature >= mask_.size()) throw std::out_of_range("RemovedSet: feature out of range");
    if (mask_[r.feature]) return;
    mask_[r.feature] = true;
    entries_.push_back(r);
  }

  std::size_t live_count() const { return mask_.size() - entries_.size(); }

 private:
  std::vector<bool> mask_;
  std::vector<RemovedFeature> entries_;
};

/// Everything a candidate evaluation needs. Rows are the augmented training
/// set (labeled + pseudo-labeled) over the full feature space.
struct EvaluationContext {
  Matrix features;
  std::vector<int> labels;
  std::vector<bool> labeled;  // true labels known for this row
  std::size_t class_count = 2;
  Criterion criterion = Criterion::CBoundIL;
  GammaMode gamma_mode = GammaMode::Fixed;
  double gamma = 1.0;        // used when gamma_mode == Fixed
  double smoothing = 1.0;    // additive smoothing for per-subset gamma
  ForestConfig forest;
  Deadline deadline;

  std::size_t dimension() const noexcept { return features.cols(); }
};

/// Builds a context over labeled + pseudo-labeled rows of `ds`.
inline EvaluationContext make_context(const PartitionedDataset& ds, const AugmentedSet& aug,
                                      const ForestConfig& forest) {
  const auto t = training_rows(ds, aug);
  EvaluationContext ctx;
  ctx.features = ds.features.gather_rows(t.rows);
  ctx.labels = t.labels;
  ctx.labeled = t.labeled;
  ctx.class_count = ds.class_count;
  ctx.forest = forest;
  return ctx;
}

struct SubsetScore {
  MarginMoments moments;
  double oob_error = 1.0;
  double gamma = 1.0;
  BoundValue cbound;
  BoundValue cbound_il;
  std::vector<double> weights;  // over subset members, sums to 1

  double value(Criterion c) const {
    switch (c) {
      case Criterion::Oob: return oob_error;
      case Criterion::CBound: return cbound.value;
      case Criterion::CBoundIL: return cbound_il.value;
    }
    return 1.0;
  }
};

/// Fits a forest on the context rows restricted to `subset` and scores it.
/// Margin moments use out-of-bag votes as class probabilities (W = V) over
/// covered rows; without any coverage the in-sample votes are used.
inline SubsetScore score_subset(const EvaluationContext& ctx, const FeatureSubset& subset,
                                std::uint64_t seed) {
  subset.validate(ctx.dimension());
  ctx.deadline.check();
  std::vector<std::size_t> rows(ctx.features.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const Matrix x = ctx.features.gather(rows, subset.indices());
  ForestConfig cfg = ctx.forest;
  cfg.seed = seed;
  const Forest forest = fit(x, ctx.labels, ctx.class_count, cfg, ctx.deadline);

  SubsetScore s;
  OobVotes oob = oob_votes(forest, x);
  if (std::none_of(oob.covered.begin(), oob.covered.end(), [](bool b) { return b; })) {
    oob.votes = votes(forest, x);
    oob.covered.assign(x.rows(), true);
  }
  s.moments = margin_moments(oob.votes, oob.covered);
  s.oob_error = oob_error(oob, ctx.labels);

  if (ctx.gamma_mode == GammaMode::PerSubset) {
    std::vector<int> truth, pred;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!ctx.labeled[r] || !oob.covered[r]) continue;
      truth.push_back(ctx.labels[r]);
      pred.push_back(oob.votes.argmax(r));
    }
    s.gamma = truth.empty() ? 1.0
                            : gamma(estimate_mislabeling(truth, pred, ctx.class_count, ctx.smoothing));
  } else {
    s.gamma = ctx.gamma;
  }
  s.cbound = cbound(s.moments);
  s.cbound_il = cbound_il(s.moments, s.gamma);
  s.weights = feature_weights(forest);
  return s;
}

inline Candidate evaluate(Candidate c, const EvaluationContext& ctx, std::uint64_t seed) {
  const SubsetScore s = score_subset(ctx, c.subset, seed);
  c.fitness = s.value(ctx.criterion);
  c.weights = s.weights;
  return c;
}

// ---------------------------------------------------------------------------
// Operators

namespace detail {

inline std::vector<std::size_t> live_features_outside(std::size_t dimension, const RemovedSet& removed,
                                                      const std::vector<bool>& member) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < dimension; ++f)
    if (!removed.contains(f) && !member[f]) out.push_back(f);
  return out;
}

inline std::vector<bool> membership(std::span<const std::size_t> features, std::size_t dimension) {
  std::vector<bool> m(dimension, false);
  for (std::size_t f : features) m[f] = true;
  return m;
}

}  // namespace detail

/// `population` random subsets of size min(floor(sqrt(d)), d).
inline std::vector<Candidate> init_population(std::size_t dimension, const GaConfig& cfg) {
  if (dimension < 1) throw std::invalid_argument("init_population: dimension must be >= 1");
  const auto len = std::min<std::size_t>(
      static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dimension)))), dimension);
  Rng rng = make_rng(derive_seed(cfg.seed, {0}));
  std::vector<std::size_t> pool(dimension);
  std::vector<Candidate> pop;
  for (std::size_t i = 0; i < cfg.population; ++i) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < len; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, dimension - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    pop.push_back({FeatureSubset({pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(len)}), {}, {}});
  }
  return pop;
}

/// Orders by fitness, then subset size, then lexicographic subset.
inline bool fitter(const Candidate& a, const Candidate& b) {
  const double fa = a.fitness.value_or(std::numeric_limits<double>::infinity());
  const double fb = b.fitness.value_or(std::numeric_limits<double>::infinity());
  if (fa != fb) return fa < fb;
  if (a.subset.size() != b.subset.size()) return a.subset.size() < b.subset.size();
  return a.subset < b.subset;
}

inline std::vector<Candidate> select_parents(const std::vector<Candidate>& pop, std::size_t p) {
  if (p > pop.size()) throw std::invalid_argument("select_parents: more parents than candidates");
  std::vector<Candidate> sorted = pop;
  std::stable_sort(sorted.begin(), sorted.end(), fitter);
  sorted.resize(p);
  return sorted;
}

/// Weight-ordered crossover with a fixed crossover point `k`: the child takes
/// a's k heaviest features, then b's features by decreasing weight (skipping
/// duplicates), then a's remaining ones, then uniform live features.
inline FeatureSubset crossover_weighted_at(const Candidate& a, const Candidate& b, std::size_t child_len,
                                           std::size_t k, std::size_t dimension,
                                           const RemovedSet& removed, Rng& rng) {
  if (child_len < 1) throw std::invalid_argument("crossover: child length must be >= 1");
  std::size_t live = 0;
  for (std::size_t f = 0; f < dimension; ++f) live += !removed.contains(f);
  if (child_len > live)
    throw std::invalid_argument("crossover: child length exceeds available features");

  std::vector<bool> member(dimension, false);
  std::vector<std::size_t> child;
  auto take = [&](std::size_t f) {
    if (child.size() >= child_len || member[f] || removed.contains(f)) return;
    member[f] = true;
    child.push_back(f);
  };
  const auto a_order = a.by_weight();
  const auto b_order = b.by_weight();
  const std::size_t from_a = std::min(k, a_order.size());
  for (std::size_t i = 0; i < from_a; ++i) take(a_order[i]);
  for (std::size_t f : b_order) take(f);
  for (std::size_t i = from_a; i < a_order.size(); ++i) take(a_order[i]);
  if (child.size() < child_len) {
    auto pool = detail::live_features_outside(dimension, removed, member);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t f : pool) take(f);
  }
  return FeatureSubset(std::move(child));
}

/// Crossover point drawn uniformly from {0, ..., child_len}.
inline FeatureSubset crossover_weighted(const Candidate& a, const Candidate& b, std::size_t child_len,
                                        std::size_t dimension, const RemovedSet& removed, Rng& rng) {
  std::uniform_int_distribution<std::size_t> cut(0, child_len);
  const std::size_t k = cut(rng);
  return crossover_weighted_at(a, b, child_len, k, dimension, removed, rng);
}

/// Child genes [0, cut) from parent2 and [cut, d) from parent1; empty when
/// that combination selects nothing.
inline std::optional<FeatureSubset> crossover_single_point(const FeatureSubset& parent1,
                                                           const FeatureSubset& parent2, std::size_t cut,
                                                           std::size_t dimension) {
  std::vector<std::size_t> child;
  for (std::size_t f : parent2)
    if (f < cut) child.push_back(f);
  for (std::size_t f : parent1)
    if (f >= cut && f < dimension) child.push_back(f);
  if (child.empty()) return std::nullopt;
  return FeatureSubset(std::move(child));
}

/// Single-point crossover with a uniform cut in {0, ..., d}; cuts giving an
/// empty child are redrawn.
inline FeatureSubset crossover_uniform(const FeatureSubset& parent1, const FeatureSubset& parent2,
                                       std::size_t dimension, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, dimension);
  for (;;) {
    if (auto child = crossover_single_point(parent1, parent2, pick(rng), dimension)) return *child;
  }
}

/// FSGA mutation: each member is swapped with probability mutation_rate for a
/// uniform live non-member, then the length changes by -1/0/+1 according to
/// cfg.length_mutation. Never empty, never touches removed features.
inline FeatureSubset mutate(const FeatureSubset& s, std::size_t dimension, const RemovedSet& removed,
                            const GaConfig& cfg, Rng& rng) {
  std::vector<std::size_t> genes(s.begin(), s.end());
  std::vector<bool> member = detail::membership(genes, dimension);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto draw_outside = [&]() -> std::optional<std::size_t> {
    const auto pool = detail::live_features_outside(dimension, removed, member);
    if (pool.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  };

  for (auto& g : genes) {
    if (!(unit(rng) < cfg.mutation_rate)) continue;
    if (const auto f = draw_outside()) {
      member[g] = false;
      member[*f] = true;
      g = *f;
    }
  }

  const double u = unit(rng);
  if (u < cfg.length_mutation[0]) {
    if (genes.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, genes.size() - 1);
      genes.erase(genes.begin() + static_cast<std::ptrdiff_t>(pick(rng)));
    }
  } else if (u >= cfg.length_mutation[0] + cfg.length_mutation[1]) {
    if (const auto f = draw_outside()) genes.push_back(*f);
  }
  return FeatureSubset(std::move(genes));
}

/// CGA mutation: every live gene of the membership vector flips with
/// probability `rate`. A child left empty gets one uniform live feature.
inline FeatureSubset mutate_bitflip(const FeatureSubset& s, std::size_t dimension, const RemovedSet& removed,
                                    double rate, Rng& rng) {
  std::vector<bool> member = detail::membership(s.indices(), dimension);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t f = 0; f < dimension; ++f) {
    if (unit(rng) < rate && !removed.contains(f)) member[f] = !member[f];
  }
  std::vector<std::size_t> genes;
  for (std::size_t f = 0; f < dimension; ++f)
    if (member[f]) genes.push_back(f);
  if (genes.empty()) {
    const auto pool = detail::live_features_outside(dimension, removed, member);
    if (pool.empty()) return s;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    genes.push_back(pool[pick(rng)]);
  }
  return FeatureSubset(std::move(genes));
}

/// Population-normalized average weight of each feature: the summed weight a
/// feature receives in the candidates containing it, over the summed weight of
/// all features in all candidates. Empty for features no candidate carries.
inline std::vector<std::optional<double>> average_weights(const std::vector<Candidate>& pop,
                                                          std::size_t dimension) {
  std::vector<double> sums(dimension, 0.0);
  std::vector<bool> present(dimension, false);
  double total = 0.0;
  for (const auto& c : pop) {
    for (std::size_t i = 0; i < c.subset.size(); ++i) {
      const std::size_t f = c.subset.indices()[i];
      const double w = c.weights.empty() ? 0.0 : c.weights[i];
      sums[f] += w;
      present[f] = true;
      total += w;
    }
  }
  std::vector<std::optional<double>> out(dimension);
  for (std::size_t f = 0; f < dimension; ++f)
    if (present[f] && total > 0.0) out[f] = sums[f] / total;
  return out;
}

struct RelevanceOutcome {
  std::vector<std::size_t> suspicious;
  std::vector<std::size_t> removed;
};

/// Shadow test. Features whose average weight is at most theta_out (and that
/// the best parent does not use) are suspicious; a forest is fitted on the
/// best parent's features, the suspicious ones and a row-permuted copy of
/// each suspicious feature. A suspicious feature whose weight does not exceed
/// its copy's by more than shadow_epsilon is removed.
inline RelevanceOutcome relevance_filter(const std::vector<Candidate>& pop, RemovedSet& removed,
                                         const Candidate& best_parent, const EvaluationContext& ctx,
                                         const GaConfig& cfg, std::size_t generation) {
  const std::size_t d = ctx.dimension();
  const double theta = cfg.theta_out_for(d);
  const auto avg = average_weights(pop, d);
  RelevanceOutcome out;
  for (std::size_t f = 0; f < d; ++f)
    if (avg[f] && *avg[f] <= theta && !removed.contains(f) && !best_parent.subset.contains(f))
      out.suspicious.push_back(f);
  if (out.suspicious.empty()) return out;

  std::vector<std::size_t> cols(best_parent.subset.begin(), best_parent.subset.end());
  const std::size_t base = cols.size();
  cols.insert(cols.end(), out.suspicious.begin(), out.suspicious.end());
  std::vector<std::size_t> rows(ctx.features.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Matrix x = ctx.features.gather(rows, cols);

  // Append permuted copies.
  Rng rng = make_rng(derive_seed(cfg.seed, {4, generation}));
  const std::size_t s = out.suspicious.size();
  Matrix wide(x.rows(), cols.size() + s);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r);
    std::copy(src.begin(), src.end(), wide.row(r).begin());
  }
  std::vector<std::size_t> perm = rows;
  for (std::size_t j = 0; j < s; ++j) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t r = 0; r < x.rows(); ++r) wide(r, cols.size() + j) = x(perm[r], base + j);
  }

  ForestConfig fcfg = ctx.forest;
  fcfg.seed = derive_seed(cfg.seed, {5, generation});
  const Forest forest = fit(wide, ctx.labels, ctx.class_count, fcfg, ctx.deadline);
  const auto w = feature_weights(forest);
  for (std::size_t j = 0; j < s; ++j) {
    const double real = w[base + j];
    const double shadow = w[cols.size() + j];
    if (real <= shadow + cfg.shadow_epsilon) {
      removed.add({out.suspicious[j], generation, real, shadow});
      out.removed.push_back(out.suspicious[j]);
    }
  }
  return out;
}

/// Features present in at least final_vote_fraction of the candidates (and
/// in at least one). Falls back to the fittest candidate's subset.
inline FeatureSubset combine_final(const std::vector<Candidate>& pop, const GaConfig& cfg) {
  if (pop.empty()) throw std::invalid_argument("combine_final: empty population");
  std::size_t dimension = 0;
  for (const auto& c : pop) dimension = std::max(dimension, c.subset.indices().back() + 1);
  std::vector<std::size_t> counts(dimension, 0);
  for (const auto& c : pop)
    for (std::size_t f : c.subset) ++counts[f];
  const double need = cfg.final_vote_fraction * static_cast<double>(pop.size());
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < dimension; ++f)
    if (counts[f] > 0 && static_cast<double>(counts[f]) >= need - 1e-12) keep.push_back(f);
  if (keep.empty()) return select_parents(pop, 1).front().subset;
  return FeatureSubset(std::move(keep));
}

/// Mean pairwise Jaccard distance between candidate subsets.
inline double population_diversity(const std::vector<Candidate>& pop) {
  if (pop.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    for (std::size_t j = i + 1; j < pop.size(); ++j) {
      std::vector<std::size_t> inter;
      std::set_intersection(pop[i].subset.begin(), pop[i].subset.end(), pop[j].subset.begin(),
                            pop[j].subset.end(), std::back_inserter(inter));
      const double uni = static_cast<double>(pop[i].subset.size() + pop[j].subset.size() - inter.size());
      total += 1.0 - static_cast<double>(inter.size()) / uni;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double diversity = 0.0;
  std::size_t removed_count = 0;
  std::size_t best_size = 0;
};

inline nlohmann::json to_json(const GenerationRecord& g) {
  return {{"generation", g.generation},   {"best_fitness", g.best_fitness},
          {"mean_fitness", g.mean_fitness}, {"diversity", g.diversity},
          {"removed_count", g.removed_count}, {"best_size", g.best_size}};
}

struct GaResult {
  FeatureSubset subset;
  Candidate best;
  std::vector<GenerationRecord> trace;
  RemovedSet removed;
  std::vector<Candidate> final_population;
};

namespace detail {

inline void evaluate_pending(std::vector<Candidate>& pop, const EvaluationContext& ctx, const GaConfig& cfg,
                             std::uint64_t stream, std::size_t generation) {
  parallel_for(pop.size(), cfg.workers, [&](std::size_t i) {
    if (pop[i].evaluated()) return;
    pop[i] = evaluate(std::move(pop[i]), ctx, derive_seed(cfg.seed, {stream, generation, i}));
  });
}

// Drops removed features from every candidate; touched candidates lose their
// evaluation. A candidate left empty gets one uniform live feature.
inline void purge_removed(std::vector<Candidate>& pop, const RemovedSet& removed, std::size_t dimension,
                          Rng& rng) {
  for (auto& c : pop) {
    if (std::none_of(c.subset.begin(), c.subset.end(), [&](std::size_t f) { return removed.contains(f); }))
      continue;
    std::vector<std::size_t> kept;
    for (std::size_t f : c.subset)
      if (!removed.contains(f)) kept.push_back(f);
    if (kept.empty()) {
      std::vector<bool> none(dimension, false);
      const auto pool = live_features_outside(dimension, removed, none);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      kept.push_back(pool[pick(rng)]);
    }
    c = Candidate{FeatureSubset(std::move(kept)), {}, {}};
  }
}

}  // namespace detail

/// Runs the configured scheme for cfg.generations generations. Each
/// generation evaluates new candidates, (FSGA) runs the relevance test,
/// keeps the cfg.parents fittest and refills the population with children.
/// CGA returns its fittest final candidate, FSGA the vote over the final
/// population.
inline GaResult run(const EvaluationContext& ctx, const GaConfig& cfg) {
  cfg.validate();
  const std::size_t d = ctx.dimension();
  GaResult result;
  result.removed = RemovedSet(d);
  std::vector<Candidate> pop = init_population(d, cfg);

  for (std::size_t g = 0; g < cfg.generations; ++g) {
    ctx.deadline.check();
    detail::evaluate_pending(pop, ctx, cfg, 1, g);

    if (cfg.scheme == Scheme::Fsga) {
      const Candidate best = select_parents(pop, 1).front();
      const auto outcome = relevance_filter(pop, result.removed, best, ctx, cfg, g);
      if (!outcome.removed.empty()) {
        Rng purge_rng = make_rng(derive_seed(cfg.seed, {6, g}));
        detail::purge_removed(pop, result.removed, d, purge_rng);
        detail::evaluate_pending(pop, ctx, cfg, 2, g);
      }
    }

    GenerationRecord rec;
    rec.generation = g;
    const auto best_it = std::min_element(pop.begin(), pop.end(), fitter);
    rec.best_fitness = *best_it->fitness;
    rec.best_size = best_it->subset.size();
    double sum = 0.0;
    for (const auto& c : pop) sum += *c.fitness;
    rec.mean_fitness = sum / static_cast<double>(pop.size());
    rec.diversity = population_diversity(pop);
    rec.removed_count = result.removed.size();
    result.trace.push_back(rec);

    if (g + 1 == cfg.generations) break;

    std::vector<Candidate> next = select_parents(pop, cfg.parents);
    Rng rng = make_rng(derive_seed(cfg.seed, {3, g}));
    std::uniform_int_distribution<std::size_t> pick_parent(0, next.size() - 1);
    const std::size_t p = next.size();
    while (next.size() < cfg.population) {
      const std::size_t i = pick_parent(rng);
      std::size_t j = pick_parent(rng);
      if (p > 1)
        while (j == i) j = pick_parent(rng);
      const Candidate& a = next[i];
      const Candidate& b = next[j];
      FeatureSubset child;
      if (cfg.scheme == Scheme::Fsga) {
        std::uniform_int_distribution<int> coin(0, 1);
        std::size_t len = coin(rng) ? a.subset.size() : b.subset.size();
        len = std::min(len, result.removed.live_count());
        child = crossover_weighted(a, b, len, d, result.removed, rng);
        child = mutate(child, d, result.removed, cfg, rng);
      } else {
        child = crossover_uniform(a.subset, b.subset, d, rng);
        child = mutate_bitflip(child, d, result.removed, cfg.mutation_rate, rng);
      }
      next.push_back({std::move(child), {}, {}});
    }
    pop = std::move(next);
  }

  std::stable_sort(pop.begin(), pop.end(), fitter);
  result.best = pop.front();
  result.subset = cfg.scheme == Scheme::Fsga ? combine_final(pop, cfg) : result.best.subset;
  result.final_population = std::move(pop);
  return result;
}

}  // namespace sewil
