#pragma once

// Self-learning: a forest trained on labeled rows pseudo-labels the unlabeled
// rows whose predicted-class vote clears a per-class threshold, then is
// retrained on the augmented set until nothing new is selected.

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "sewil/common.hpp"
#include "sewil/dataset.hpp"
#include "sewil/forest.hpp"
#include "sewil/votes.hpp"

namespace sewil {

/// Per-class vote thresholds, each within [1/K, 1].
struct ThresholdVector {
  std::vector<double> theta;
};

struct ConditionalError {
  double error = 1.0;
  double coverage = 0.0;
};

/// Selected rows are those whose predicted-class vote reaches that class's
/// threshold. Error is the mean of (1 - predicted vote) over the selection;
/// coverage is the selected fraction. An empty selection yields (1, 0).
inline ConditionalError conditional_error(const VoteMatrix& v, const ThresholdVector& t) {
  if (t.theta.size() != v.classes())
    throw std::invalid_argument("conditional_error: threshold size differs from class count");
  double err = 0.0;
  std::size_t selected = 0;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const auto c = static_cast<std::size_t>(v.argmax(r));
    if (v(r, c) >= t.theta[c]) {
      err += 1.0 - v(r, c);
      ++selected;
    }
  }
  if (selected == 0) return {};
  return {err / static_cast<double>(selected),
          static_cast<double>(selected) / static_cast<double>(v.rows())};
}

struct ClassThreshold {
  double theta = 1.0;
  double objective = 0.0;
  std::size_t predicted = 0;
  std::size_t selected = 0;
};

/// Objective for one class over the rows predicted as that class:
///   J(theta) = mean(1 - vote | vote >= theta) + (1 - selected / predicted).
inline double threshold_objective(std::span<const double> class_votes, double theta) {
  double err = 0.0;
  std::size_t sel = 0;
  for (double v : class_votes)
    if (v >= theta) {
      err += 1.0 - v;
      ++sel;
    }
  const double n = static_cast<double>(class_votes.size());
  const double e = sel ? err / static_cast<double>(sel) : 1.0;
  return e + (1.0 - static_cast<double>(sel) / n);
}

/// Per-class threshold search over the grid {1/K} U {observed predicted-class
/// votes}. Ties go to the lower threshold. Classes nobody predicts get 1.
inline std::vector<ClassThreshold> find_class_thresholds(const VoteMatrix& v) {
  if (v.rows() == 0) throw std::invalid_argument("find_threshold: empty unlabeled set");
  const std::size_t k = v.classes();
  std::vector<std::vector<double>> by_class(k);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const auto c = static_cast<std::size_t>(v.argmax(r));
    by_class[c].push_back(v(r, c));
  }
  std::vector<ClassThreshold> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& votes_c = by_class[c];
    out[c].predicted = votes_c.size();
    if (votes_c.empty()) continue;
    std::vector<double> grid = votes_c;
    grid.push_back(1.0 / static_cast<double>(k));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    double best = std::numeric_limits<double>::infinity();
    for (double theta : grid) {
      const double j = threshold_objective(votes_c, theta);
      if (j < best) {
        best = j;
        out[c].theta = theta;
      }
    }
    out[c].objective = best;
    out[c].selected = static_cast<std::size_t>(
        std::count_if(votes_c.begin(), votes_c.end(), [&](double x) { return x >= out[c].theta; }));
  }
  return out;
}

inline ThresholdVector find_threshold(const VoteMatrix& v) {
  ThresholdVector t;
  for (const auto& c : find_class_thresholds(v)) t.theta.push_back(c.theta);
  return t;
}

struct PseudoLabel {
  int label = kNoLabel;
  double vote = 0.0;
  std::size_t round = 0;
};

struct SlaRound {
  std::size_t round = 0;
  std::size_t remaining = 0;  // unlabeled rows still without a pseudo-label
  std::size_t assigned = 0;
  std::vector<double> theta;
  double coverage = 0.0;
};

/// Pseudo-labels keyed by row index of the dataset passed to sla().
struct AugmentedSet {
  std::map<std::size_t, PseudoLabel> pseudo_labels;
  std::size_t rounds = 0;
  std::vector<SlaRound> trace;
};

/// Rows and labels a forest trains on: labeled rows with their observed label,
/// then pseudo-labeled rows, both in ascending row order.
struct TrainingRows {
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  std::vector<bool> labeled;  // row carries a real (not pseudo) label
};

inline TrainingRows training_rows(const PartitionedDataset& ds, const AugmentedSet& aug) {
  TrainingRows t;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds.partition[r] == Partition::Labeled) {
      t.rows.push_back(r);
      t.labels.push_back(ds.observed[r]);
      t.labeled.push_back(true);
    } else if (const auto it = aug.pseudo_labels.find(r); it != aug.pseudo_labels.end()) {
      t.rows.push_back(r);
      t.labels.push_back(it->second.label);
      t.labeled.push_back(false);
    }
  }
  return t;
}

struct SlaOptions {
  std::size_t max_rounds = 10;
  Deadline deadline;
};

struct SlaResult {
  AugmentedSet augmented;
  Forest forest;  // fitted on the final augmented set
};

inline nlohmann::json to_json(const SlaRound& r) {
  return {{"round", r.round}, {"remaining", r.remaining}, {"assigned", r.assigned},
          {"theta", r.theta}, {"coverage", r.coverage}};
}

inline SlaResult sla(const PartitionedDataset& ds, const ForestConfig& fcfg,
                     const SlaOptions& opts = {}) {
  if (ds.rows_in(Partition::Labeled).empty())
    throw std::invalid_argument("sla: labeled partition is empty");

  SlaResult result;
  auto& aug = result.augmented;
  std::vector<std::size_t> remaining = ds.rows_in(Partition::Unlabeled);

  for (;;) {
    opts.deadline.check();
    const auto train = training_rows(ds, aug);
    ForestConfig cfg = fcfg;
    cfg.seed = derive_seed(fcfg.seed, {aug.rounds});
    result.forest = fit(ds.features.gather_rows(train.rows), train.labels, ds.class_count, cfg,
                        opts.deadline);
    if (remaining.empty() || aug.rounds >= opts.max_rounds) break;

    const VoteMatrix v = votes(result.forest, ds.features.gather_rows(remaining), fcfg.workers);
    const ThresholdVector theta = find_threshold(v);
    SlaRound round{aug.rounds + 1, remaining.size(), 0, theta.theta,
                   conditional_error(v, theta).coverage};
    std::vector<std::size_t> still;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const int c = v.argmax(i);
      const double vote = v(i, static_cast<std::size_t>(c));
      if (vote >= theta.theta[static_cast<std::size_t>(c)]) {
        aug.pseudo_labels[remaining[i]] = {c, vote, aug.rounds + 1};
        ++round.assigned;
      } else {
        still.push_back(remaining[i]);
      }
    }
    aug.trace.push_back(round);
    if (round.assigned == 0) break;
    ++aug.rounds;
    remaining = std::move(still);
  }
  return result;
}

}  // namespace sewil
