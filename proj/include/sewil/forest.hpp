#pragma once

// Random forest of axis-aligned Gini trees. Trees vote with the class
// fractions of the training examples in the reached leaf; the forest vote is
// the unweighted mean over trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sewil/common.hpp"
#include "sewil/matrix.hpp"
#include "sewil/parallel.hpp"
#include "sewil/votes.hpp"

namespace sewil {

struct ForestConfig {
  std::size_t tree_count = 200;
  std::optional<std::size_t> max_depth;           // unlimited when empty
  std::size_t min_leaf = 1;
  std::optional<std::size_t> features_per_split;  // ceil(sqrt(d)) when empty
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    if (tree_count < 1) throw std::invalid_argument("forest: tree_count must be >= 1");
    if (min_leaf < 1) throw std::invalid_argument("forest: min_leaf must be >= 1");
    if (features_per_split && *features_per_split < 1)
      throw std::invalid_argument("forest: features_per_split must be >= 1");
  }

  std::size_t split_features(std::size_t dimension) const {
    const std::size_t m = features_per_split
                              ? *features_per_split
                              : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dimension))));
    return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(dimension, 1));
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;     // index into the leaf table
};

class DecisionTree {
 public:
  std::vector<TreeNode> nodes;
  std::vector<double> leaf_fractions;  // leaf_count x K, row-major
  std::vector<double> importance;      // impurity decrease per feature

  std::span<const double> vote(std::span<const double> x, std::size_t classes) const {
    std::size_t n = 0;
    while (nodes[n].feature >= 0) {
      const auto& node = nodes[n];
      n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                       ? node.left
                                       : node.right);
    }
    return {leaf_fractions.data() + static_cast<std::size_t>(nodes[n].leaf) * classes, classes};
  }

  std::size_t leaf_count(std::size_t classes) const { return leaf_fractions.size() / classes; }
};

class Forest;
inline Forest fit(const Matrix& x, std::span<const int> y, std::size_t classes, const ForestConfig& cfg,
           const Deadline& deadline);

class Forest {
 public:
  std::size_t class_count() const noexcept { return classes_; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t training_size() const noexcept { return training_size_; }
  std::size_t tree_count() const noexcept { return trees_.size(); }
  /// True when the training labels held a single class.
  bool single_class() const noexcept { return single_class_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  /// in_bag()[t][r]: multiplicity of training row r in tree t's bootstrap.
  const std::vector<std::vector<std::uint32_t>>& in_bag() const noexcept { return in_bag_; }

  nlohmann::json to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf});
      trees.push_back({{"nodes", nodes}, {"leaves", t.leaf_fractions}, {"importance", t.importance}});
    }
    return {{"format", "sewil-forest"}, {"version", 1},         {"classes", classes_},
            {"dimension", dimension_},  {"training_size", training_size_},
            {"single_class", single_class_}, {"trees", trees}, {"in_bag", in_bag_}};
  }

  static Forest from_json(const nlohmann::json& j) {
    if (j.at("format") != "sewil-forest" || j.at("version") != 1)
      throw std::runtime_error("unsupported forest file");
    Forest f;
    f.classes_ = j.at("classes");
    f.dimension_ = j.at("dimension");
    f.training_size_ = j.at("training_size");
    f.single_class_ = j.at("single_class");
    for (const auto& jt : j.at("trees")) {
      DecisionTree t;
      for (const auto& n : jt.at("nodes"))
        t.nodes.push_back({n[0].get<std::int32_t>(), n[1].get<double>(), n[2].get<std::int32_t>(),
                           n[3].get<std::int32_t>(), n[4].get<std::int32_t>()});
      t.leaf_fractions = jt.at("leaves").get<std::vector<double>>();
      t.importance = jt.at("importance").get<std::vector<double>>();
      f.trees_.push_back(std::move(t));
    }
    f.in_bag_ = j.at("in_bag").get<std::vector<std::vector<std::uint32_t>>>();
    return f;
  }

 private:
  friend Forest fit(const Matrix&, std::span<const int>, std::size_t, const ForestConfig&,
                    const Deadline&);
  std::size_t classes_ = 0;
  std::size_t dimension_ = 0;
  std::size_t training_size_ = 0;
  bool single_class_ = false;
  std::vector<DecisionTree> trees_;
  std::vector<std::vector<std::uint32_t>> in_bag_;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& columns, std::span<const int> y, std::size_t classes,
              std::size_t dimension, const ForestConfig& cfg, std::uint64_t seed)
      : columns_(columns),
        y_(y),
        n_(y.size()),
        classes_(classes),
        dimension_(dimension),
        cfg_(cfg),
        mtry_(cfg.split_features(dimension)),
        rng_(make_rng(seed)),
        features_(dimension),
        counts_(classes),
        left_(classes),
        right_(classes) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::uint32_t>& in_bag) {
    in_bag.assign(n_, 0);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
      samples_.resize(n_);
      for (auto& s : samples_) {
        s = pick(rng_);
        ++in_bag[s];
      }
    } else {
      samples_.resize(n_);
      std::iota(samples_.begin(), samples_.end(), std::size_t{0});
      std::fill(in_bag.begin(), in_bag.end(), 1u);
    }
    tree_ = DecisionTree{};
    tree_.importance.assign(dimension_, 0.0);
    grow(0, samples_.size(), 0);
    const double total = static_cast<double>(samples_.size());
    for (auto& v : tree_.importance) v /= total;
    return std::move(tree_);
  }

 private:
  double x(std::size_t row, std::size_t feature) const { return columns_[feature * n_ + row]; }

  std::int32_t make_leaf(std::size_t m) {
    TreeNode node;
    node.leaf = static_cast<std::int32_t>(tree_.leaf_fractions.size() / classes_);
    for (std::size_t c = 0; c < classes_; ++c)
      tree_.leaf_fractions.push_back(counts_[c] / static_cast<double>(m));
    tree_.nodes.push_back(node);
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t m = end - begin;
    std::fill(counts_.begin(), counts_.end(), 0.0);
    for (std::size_t i = begin; i < end; ++i) counts_[static_cast<std::size_t>(y_[samples_[i]])] += 1.0;
    double parent_sq = 0.0;
    std::size_t present = 0;
    for (double c : counts_) {
      parent_sq += c * c;
      present += c > 0.0;
    }
    const double parent_score = parent_sq / static_cast<double>(m);

    const bool depth_capped = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (present <= 1 || m < 2 * cfg_.min_leaf || depth_capped) return make_leaf(m);

    // Sample features without replacement until mtry non-constant ones were
    // examined (or all features were).
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    std::size_t nonconstant = 0;
    for (std::size_t i = 0; i < dimension_ && nonconstant < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, dimension_ - 1);
      std::swap(features_[i], features_[pick(rng_)]);
      const std::size_t f = features_[i];

      pairs_.clear();
      for (std::size_t k = begin; k < end; ++k) pairs_.emplace_back(x(samples_[k], f), y_[samples_[k]]);
      std::sort(pairs_.begin(), pairs_.end());
      if (pairs_.front().first == pairs_.back().first) continue;
      ++nonconstant;

      std::fill(left_.begin(), left_.end(), 0.0);
      right_ = counts_;
      double left_sq = 0.0, right_sq = parent_sq;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        const auto c = static_cast<std::size_t>(pairs_[k].second);
        left_sq += 2.0 * left_[c] + 1.0;
        left_[c] += 1.0;
        right_sq -= 2.0 * right_[c] - 1.0;
        right_[c] -= 1.0;
        const std::size_t n_left = k + 1, n_right = m - n_left;
        if (pairs_[k].first == pairs_[k + 1].first) continue;
        if (n_left < cfg_.min_leaf || n_right < cfg_.min_leaf) continue;
        const double score = left_sq / static_cast<double>(n_left) + right_sq / static_cast<double>(n_right);
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          double t = 0.5 * (pairs_[k].first + pairs_[k + 1].first);
          if (!(t < pairs_[k + 1].first)) t = pairs_[k].first;
          best_threshold = t;
        }
      }
    }
    if (!std::isfinite(best_score)) return make_leaf(m);

    tree_.importance[best_feature] += std::max(0.0, best_score - parent_score);

    const auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t s) { return x(s, best_feature) <= best_threshold; });
    const auto split_at = static_cast<std::size_t>(mid - samples_.begin());

    const auto self = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back({static_cast<std::int32_t>(best_feature), best_threshold, -1, -1, -1});
    const std::int32_t l = grow(begin, split_at, depth + 1);
    const std::int32_t r = grow(split_at, end, depth + 1);
    tree_.nodes[static_cast<std::size_t>(self)].left = l;
    tree_.nodes[static_cast<std::size_t>(self)].right = r;
    return self;
  }

  const std::vector<double>& columns_;
  std::span<const int> y_;
  std::size_t n_;
  std::size_t classes_;
  std::size_t dimension_;
  const ForestConfig& cfg_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, int>> pairs_;
  std::vector<double> counts_, left_, right_;
  DecisionTree tree_;
};

}  // namespace detail

/// Grows cfg.tree_count trees. Tree t draws from the stream (cfg.seed, t), so
/// the forest does not depend on cfg.workers.
inline Forest fit(const Matrix& x, std::span<const int> y, std::size_t classes,
                  const ForestConfig& cfg, const Deadline& deadline = {}) {
  cfg.validate();
  if (x.rows() == 0) throw std::invalid_argument("forest: empty training set");
  if (x.rows() != y.size()) throw std::invalid_argument("forest: label count differs from row count");
  if (x.cols() == 0) throw std::invalid_argument("forest: zero-dimensional input");
  if (classes < 1) throw std::invalid_argument("forest: class count must be positive");
  std::vector<bool> seen(classes, false);
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw std::invalid_argument("forest: label out of range");
    seen[static_cast<std::size_t>(label)] = true;
  }

  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> columns(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) columns[c * n + r] = x(r, c);

  Forest f;
  f.classes_ = classes;
  f.dimension_ = d;
  f.training_size_ = n;
  f.single_class_ = std::count(seen.begin(), seen.end(), true) == 1;
  f.trees_.resize(cfg.tree_count);
  f.in_bag_.resize(cfg.tree_count);
  parallel_for(cfg.tree_count, cfg.workers, [&](std::size_t t) {
    deadline.check();
    detail::TreeBuilder builder(columns, y, classes, d, cfg, derive_seed(cfg.seed, {t}));
    f.trees_[t] = builder.build(f.in_bag_[t]);
  });
  return f;
}

/// Mean leaf class-fraction vector over all trees, per row of `x`.
inline VoteMatrix votes(const Forest& f, const Matrix& x, std::size_t workers = 1) {
  if (x.cols() != f.dimension()) throw std::invalid_argument("votes: dimension mismatch");
  const std::size_t k = f.class_count();
  VoteMatrix out(x.rows(), k);
  const double inv = 1.0 / static_cast<double>(f.tree_count());
  parallel_for(x.rows(), workers, [&](std::size_t r) {
    auto dst = out.row(r);
    for (const auto& tree : f.trees()) {
      const auto v = tree.vote(x.row(r), k);
      for (std::size_t c = 0; c < k; ++c) dst[c] += v[c];
    }
    for (auto& v : dst) v *= inv;
  });
  return out;
}

/// Majority-vote labels; ties go to the smallest class index.
inline std::vector<int> predict(const Forest& f, const Matrix& x, std::size_t workers = 1) {
  return votes(f, x, workers).argmax();
}

struct OobVotes {
  VoteMatrix votes;            // uncovered rows hold the uniform vector
  std::vector<bool> covered;   // row was out-of-bag for at least one tree

  double coverage() const {
    if (covered.empty()) return 0.0;
    return static_cast<double>(std::count(covered.begin(), covered.end(), true)) /
           static_cast<double>(covered.size());
  }
};

/// Votes of each training row averaged over the trees whose bootstrap
/// excluded it. `x` must be the matrix the forest was fitted on.
inline OobVotes oob_votes(const Forest& f, const Matrix& x) {
  if (x.rows() != f.training_size())
    throw std::invalid_argument("oob_votes: row count differs from the training set");
  if (x.cols() != f.dimension()) throw std::invalid_argument("oob_votes: dimension mismatch");
  const std::size_t k = f.class_count();
  OobVotes out{VoteMatrix(x.rows(), k), std::vector<bool>(x.rows(), false)};
  std::vector<std::size_t> used(x.rows(), 0);
  for (std::size_t t = 0; t < f.tree_count(); ++t) {
    const auto& bag = f.in_bag()[t];
    for (std::size_t r = 0; r < x.rows(); ++r) {
      if (bag[r] != 0) continue;
      const auto v = f.trees()[t].vote(x.row(r), k);
      auto dst = out.votes.row(r);
      for (std::size_t c = 0; c < k; ++c) dst[c] += v[c];
      ++used[r];
    }
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto dst = out.votes.row(r);
    if (used[r] == 0) {
      std::fill(dst.begin(), dst.end(), 1.0 / static_cast<double>(k));
      continue;
    }
    out.covered[r] = true;
    for (auto& v : dst) v /= static_cast<double>(used[r]);
  }
  return out;
}

/// Misclassification rate of the out-of-bag majority vote over covered rows.
inline double oob_error(const OobVotes& oob, std::span<const int> y) {
  if (y.size() != oob.covered.size()) throw std::invalid_argument("oob_error: label count mismatch");
  std::size_t covered = 0, wrong = 0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    if (!oob.covered[r]) continue;
    ++covered;
    wrong += oob.votes.argmax(r) != y[r];
  }
  if (covered == 0) throw std::runtime_error("oob_error: no out-of-bag coverage");
  return static_cast<double>(wrong) / static_cast<double>(covered);
}

inline double oob_error(const Forest& f, const Matrix& x, std::span<const int> y) {
  return oob_error(oob_votes(f, x), y);
}

/// Mean-decrease-impurity importance normalized to sum to one. A forest with
/// no splits gets uniform weights.
inline std::vector<double> feature_weights(const Forest& f) {
  std::vector<double> w(f.dimension(), 0.0);
  for (const auto& t : f.trees())
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += t.importance[j];
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace sewil
