#pragma once

// Datasets with labeled / unlabeled / test partitions: loading, splitting,
// projection onto feature subsets, synthetic generation and label corruption.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sewil/bounds.hpp"
#include "sewil/common.hpp"
#include "sewil/matrix.hpp"

namespace sewil {

enum class Partition : std::uint8_t { Labeled, Unlabeled, Test };

inline const char* to_string(Partition p) {
  switch (p) {
    case Partition::Labeled: return "labeled";
    case Partition::Unlabeled: return "unlabeled";
    case Partition::Test: return "test";
  }
  return "?";
}

/// Sorted set of distinct zero-based feature indices. Never empty.
class FeatureSubset {
 public:
  FeatureSubset() = default;

  explicit FeatureSubset(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (indices_.empty()) throw std::invalid_argument("feature subset must not be empty");
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
      throw std::invalid_argument("feature subset contains duplicate indices");
  }

  static FeatureSubset all(std::size_t dimension) {
    std::vector<std::size_t> idx(dimension);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return FeatureSubset(std::move(idx));
  }

  /// Throws unless every index is below `dimension`.
  void validate(std::size_t dimension) const {
    if (indices_.empty()) throw std::invalid_argument("feature subset must not be empty");
    if (indices_.back() >= dimension)
      throw std::out_of_range("feature index " + std::to_string(indices_.back()) +
                              " out of range for dimension " + std::to_string(dimension));
  }

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  bool contains(std::size_t f) const {
    return std::binary_search(indices_.begin(), indices_.end(), f);
  }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;
  friend auto operator<=>(const FeatureSubset&, const FeatureSubset&) = default;

 private:
  std::vector<std::size_t> indices_;
};

struct PartitionedDataset {
  Matrix features;
  /// Ground-truth class per row (kNoLabel when unknown). For unlabeled rows
  /// this is hidden from training and used only for evaluation.
  std::vector<int> truth;
  /// Label visible to training: the (possibly corrupted) label of labeled
  /// rows, the label of test rows, kNoLabel for unlabeled rows.
  std::vector<int> observed;
  std::vector<Partition> partition;
  std::size_t class_count = 0;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dimension() const noexcept { return features.cols(); }

  std::vector<std::size_t> rows_in(Partition p) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < partition.size(); ++r)
      if (partition[r] == p) out.push_back(r);
    return out;
  }

  void validate() const {
    const std::size_t n = size();
    if (truth.size() != n || observed.size() != n || partition.size() != n)
      throw std::logic_error("dataset: per-row vectors disagree with row count");
    if (class_count < 1) throw std::logic_error("dataset: class_count must be positive");
    for (std::size_t r = 0; r < n; ++r) {
      const int y = observed[r];
      if (partition[r] == Partition::Unlabeled) {
        if (y != kNoLabel) throw std::logic_error("dataset: unlabeled row exposes a label");
      } else if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
        throw std::logic_error("dataset: row " + std::to_string(r) + " lacks a valid label");
      }
    }
  }
};

/// FNV-1a over shape, feature bytes and ground truth. Hex, 16 characters.
inline std::string dataset_hash(const PartitionedDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t shape[2] = {ds.size(), ds.dimension()};
  mix(shape, sizeof(shape));
  mix(ds.features.data().data(), ds.features.data().size() * sizeof(double));
  mix(ds.truth.data(), ds.truth.size() * sizeof(int));
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Loading

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_finite(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline int intern_label(std::string_view name, std::vector<std::string>& names) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) return static_cast<int>(it - names.begin());
  names.emplace_back(name);
  return static_cast<int>(names.size() - 1);
}

inline PartitionedDataset all_labeled(Matrix x, std::vector<int> labels,
                                      std::vector<std::string> names) {
  PartitionedDataset ds;
  ds.features = std::move(x);
  ds.truth = labels;
  ds.observed = std::move(labels);
  ds.partition.assign(ds.features.rows(), Partition::Labeled);
  ds.class_count = names.size();
  ds.class_names = std::move(names);
  return ds;
}

}  // namespace detail

/// Reads a delimited file. Every row is tagged `labeled`; labels are mapped
/// to classes in order of first appearance. Without a header row,
/// `label_column` is a zero-based column number.
inline PartitionedDataset load_csv(std::istream& in, const std::string& label_column,
                                   const CsvOptions& opts = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::size_t width = 0;
  std::size_t label_idx = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };

  if (opts.header) {
    if (!next_line()) throw std::runtime_error("no data rows");
    for (auto f : detail::split_fields(line, opts.delimiter)) header.emplace_back(f);
    width = header.size();
    const auto it = std::find(header.begin(), header.end(), label_column);
    if (it == header.end()) throw std::runtime_error("unknown label column '" + label_column + "'");
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    double idx = 0;
    if (!detail::parse_finite(label_column, idx) || idx < 0 || idx != std::floor(idx))
      throw std::runtime_error("without a header the label column must be a column number");
    label_idx = static_cast<std::size_t>(idx);
  }

  auto column_name = [&](std::size_t c) {
    return c < header.size() ? "'" + header[c] + "'" : std::to_string(c);
  };

  Matrix x;
  std::vector<int> labels;
  std::vector<std::string> names;
  std::vector<double> values;
  while (next_line()) {
    const auto fields = detail::split_fields(line, opts.delimiter);
    if (width == 0) {
      width = fields.size();
      if (label_idx >= width) throw std::runtime_error("unknown label column " + label_column);
    }
    if (fields.size() != width)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " fields, found " +
                               std::to_string(fields.size()));
    values.clear();
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_idx) continue;
      double v = 0.0;
      if (!detail::parse_finite(fields[c], v))
        throw std::runtime_error("line " + std::to_string(line_no) + ", column " +
                                 column_name(c) + ": non-numeric feature cell '" +
                                 std::string(fields[c]) + "'");
      values.push_back(v);
    }
    labels.push_back(detail::intern_label(fields[label_idx], names));
    x.append_row(values);
  }
  if (labels.empty()) throw std::runtime_error("no data rows");
  return detail::all_labeled(std::move(x), std::move(labels), std::move(names));
}

inline PartitionedDataset load_csv(const std::string& path, const std::string& label_column,
                                   const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_csv(in, label_column, opts);
}

/// Reads `label idx:val ...` lines with 1-based strictly ascending indices
/// into a dense matrix; unlisted entries are zero.
inline PartitionedDataset load_libsvm(std::istream& in) {
  struct Row {
    int label;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::vector<std::string> names;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;
    Row row{detail::intern_label(tok, names), {}};
    std::size_t last = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      double idx = 0, val = 0;
      if (colon == std::string::npos ||
          !detail::parse_finite(std::string_view(tok).substr(0, colon), idx) ||
          !detail::parse_finite(std::string_view(tok).substr(colon + 1), val) || idx < 1 ||
          idx != std::floor(idx))
        throw std::runtime_error("line " + std::to_string(line_no) + ": malformed entry '" +
                                 tok + "'");
      const auto i = static_cast<std::size_t>(idx);
      if (i <= last)
        throw std::runtime_error("line " + std::to_string(line_no) + ": indices not ascending");
      last = i;
      dim = std::max(dim, i);
      row.entries.emplace_back(i - 1, val);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("no data rows");

  Matrix x(rows.size(), dim);
  std::vector<int> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    labels[r] = rows[r].label;
    for (const auto& [c, v] : rows[r].entries) x(r, c) = v;
  }
  return detail::all_labeled(std::move(x), std::move(labels), std::move(names));
}

inline PartitionedDataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_libsvm(in);
}

/// Writes features plus a trailing `label` column holding ground-truth class
/// names. Round-trips through load_csv(..., "label").
inline void write_csv(const PartitionedDataset& ds, std::ostream& out) {
  for (std::size_t c = 0; c < ds.dimension(); ++c) out << 'f' << c << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.features.row(r)) out << v << ',';
    const int y = ds.truth[r];
    out << (y >= 0 ? ds.class_names.at(static_cast<std::size_t>(y)) : std::string("?")) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Partitioning and projection

struct SplitRatios {
  double labeled = 0.1;
  double unlabeled = 0.8;
  double test = 0.1;
};

namespace detail {

// Largest-remainder apportionment of `total` by `weights`.
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    used += out[i];
    rema.emplace_back(-(exact - static_cast<double>(out[i])), i);
  }
  std::stable_sort(rema.begin(), rema.end());
  for (std::size_t k = 0; used < total && k < rema.size(); ++k, ++used) ++out[rema[k].second];
  return out;
}

}  // namespace detail

/// Stratified random split into labeled / unlabeled / test partitions. Each
/// class receives at least one labeled row; partition totals follow the
/// ratios by largest-remainder rounding. Ground truth stays on every row.
inline PartitionedDataset split(const PartitionedDataset& ds, const SplitRatios& ratios,
                                std::uint64_t seed) {
  const std::array<double, 3> w{ratios.labeled, ratios.unlabeled, ratios.test};
  for (double v : w)
    if (!(v >= 0.0)) throw std::invalid_argument("split: negative ratio");
  if (!(ratios.labeled > 0.0)) throw std::invalid_argument("split: labeled fraction must be positive");
  if (std::abs(w[0] + w[1] + w[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split: ratios must sum to 1");

  const std::size_t k = ds.class_count;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const int y = ds.truth[r];
    if (y < 0) throw std::invalid_argument("split: row " + std::to_string(r) + " has no label");
    by_class[static_cast<std::size_t>(y)].push_back(r);
  }
  const std::size_t required =
      static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v > 0; }));
  for (std::size_t c = 0; c < k; ++c)
    if (!by_class[c].empty() && by_class[c].size() < required)
      throw std::invalid_argument("split: class '" +
                                  (c < ds.class_names.size() ? ds.class_names[c] : std::to_string(c)) +
                                  "' has fewer examples than partitions requiring it");

  const auto totals = detail::apportion(ds.size(), w);

  // Per-class quotas for labeled and test; unlabeled takes the rest.
  std::vector<std::array<std::size_t, 3>> quota(k, {0, 0, 0});
  for (std::size_t p : {std::size_t{0}, std::size_t{2}}) {
    std::size_t assigned = 0;
    std::vector<std::pair<double, std::size_t>> rema;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t nc = by_class[c].size();
      if (nc == 0) continue;
      const double exact = w[p] * static_cast<double>(nc);
      std::size_t q = static_cast<std::size_t>(std::floor(exact + 1e-9));
      if (p == 0) q = std::max<std::size_t>(q, 1);
      const std::size_t room = nc - quota[c][0] - quota[c][2];
      q = std::min(q, room);
      quota[c][p] = q;
      assigned += q;
      rema.emplace_back(-(exact - std::floor(exact + 1e-9)), c);
    }
    std::stable_sort(rema.begin(), rema.end());
    bool progress = true;
    while (assigned < totals[p] && progress) {
      progress = false;
      for (const auto& [neg, c] : rema) {
        if (assigned >= totals[p]) break;
        if (quota[c][0] + quota[c][2] < by_class[c].size()) {
          ++quota[c][p];
          ++assigned;
          progress = true;
        }
      }
    }
  }

  Rng rng = make_rng(seed);
  PartitionedDataset out = ds;
  for (std::size_t c = 0; c < k; ++c) {
    auto rows = by_class[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t r = rows[i];
      Partition p = Partition::Unlabeled;
      if (i < quota[c][0]) p = Partition::Labeled;
      else if (i < quota[c][0] + quota[c][2]) p = Partition::Test;
      out.partition[r] = p;
      out.observed[r] = p == Partition::Unlabeled ? kNoLabel : ds.truth[r];
    }
  }
  return out;
}

/// Restricts columns to `subset` (ascending index order).
inline PartitionedDataset project(const PartitionedDataset& ds, const FeatureSubset& subset) {
  subset.validate(ds.dimension());
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  PartitionedDataset out;
  out.features = ds.features.gather(rows, subset.indices());
  out.truth = ds.truth;
  out.observed = ds.observed;
  out.partition = ds.partition;
  out.class_count = ds.class_count;
  out.class_names = ds.class_names;
  return out;
}

/// Replaces each labeled row's observed label j by i with probability p(i, j).
/// Ground truth is kept.
inline PartitionedDataset inject_label_noise(const PartitionedDataset& ds,
                                             const MislabelingMatrix& p, std::uint64_t seed) {
  if (p.classes() != ds.class_count)
    throw std::invalid_argument("inject_label_noise: matrix size differs from class count");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PartitionedDataset out = ds;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (out.partition[r] != Partition::Labeled) continue;
    const auto j = static_cast<std::size_t>(out.observed[r]);
    const double u = unit(rng);
    double acc = 0.0;
    std::size_t chosen = j;
    for (std::size_t i = 0; i < p.classes(); ++i) {
      acc += p(i, j);
      if (u < acc) {
        chosen = i;
        break;
      }
      if (p(i, j) > 0.0) chosen = i;  // guards round-off in the last bucket
    }
    out.observed[r] = static_cast<int>(chosen);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Labels come from a sparse linear rule over the informative columns:
/// binary problems threshold one score at zero, K > 2 takes the argmax of K
/// scores. All other columns are independent uniform noise on [-1, 1].
struct SyntheticRule {
  std::vector<std::size_t> informative;
  Matrix weights;  // one row per score (1 for K = 2, K otherwise)
  std::size_t class_count = 2;

  std::vector<double> scores(std::span<const double> row) const {
    std::vector<double> s(weights.rows(), 0.0);
    for (std::size_t k = 0; k < weights.rows(); ++k)
      for (std::size_t j = 0; j < informative.size(); ++j)
        s[k] += weights(k, j) * row[informative[j]];
    return s;
  }

  int classify(std::span<const double> row) const {
    const auto s = scores(row);
    if (class_count == 2) return s[0] > 0.0 ? 1 : 0;
    return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
  }

  /// Distance of the scores from the decision boundary.
  double gap(std::span<const double> row) const {
    auto s = scores(row);
    if (class_count == 2) return std::abs(s[0]);
    std::partial_sort(s.begin(), s.begin() + 2, s.end(), std::greater<>());
    return s[0] - s[1];
  }
};

struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t dimension = 20;
  std::size_t informative = 5;
  std::size_t classes = 2;
  double noise = 0.0;   // label flip probability
  double margin = 0.0;  // rows closer than this to the boundary are redrawn
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  PartitionedDataset data;  // all rows labeled; truth includes flips
  SyntheticRule rule;
  SyntheticSpec spec;
  std::vector<int> clean_labels;  // rule output before flipping
};

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.informative > spec.dimension)
    throw std::invalid_argument("generate_synthetic: informative exceeds dimension");
  if (spec.informative == 0 || spec.dimension == 0 || spec.n == 0)
    throw std::invalid_argument("generate_synthetic: n, dimension and informative must be positive");
  if (spec.classes < 2) throw std::invalid_argument("generate_synthetic: need at least 2 classes");
  if (!(spec.noise >= 0.0 && spec.noise < 0.5))
    throw std::invalid_argument("generate_synthetic: noise must lie in [0, 0.5)");

  Rng rng = make_rng(spec.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticDataset out;
  out.spec = spec;
  auto& rule = out.rule;
  rule.class_count = spec.classes;
  std::vector<std::size_t> cols(spec.dimension);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::shuffle(cols.begin(), cols.end(), rng);
  rule.informative.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(spec.informative));
  std::sort(rule.informative.begin(), rule.informative.end());

  const std::size_t n_scores = spec.classes == 2 ? 1 : spec.classes;
  rule.weights = Matrix(n_scores, spec.informative);
  for (std::size_t k = 0; k < n_scores; ++k) {
    double norm = 0.0;
    for (std::size_t j = 0; j < spec.informative; ++j) {
      // Keep every informative weight away from zero so each column matters.
      const double w = normal(rng);
      rule.weights(k, j) = std::copysign(0.5 + std::abs(w), w);
      norm += rule.weights(k, j) * rule.weights(k, j);
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < spec.informative; ++j) rule.weights(k, j) /= norm;
  }

  Matrix x(spec.n, spec.dimension);
  std::vector<int> labels(spec.n);
  out.clean_labels.resize(spec.n);
  constexpr int kMaxDraws = 10000;
  for (std::size_t r = 0; r < spec.n; ++r) {
    auto row = x.row(r);
    int draws = 0;
    do {
      if (++draws > kMaxDraws)
        throw std::invalid_argument("generate_synthetic: margin too large to sample rows");
      for (auto& v : row) v = uniform(rng);
    } while (spec.margin > 0.0 && rule.gap(row) < spec.margin);
    const int clean = rule.classify(row);
    out.clean_labels[r] = clean;
    int y = clean;
    if (spec.noise > 0.0 && unit(rng) < spec.noise) {
      std::uniform_int_distribution<std::size_t> other(0, spec.classes - 2);
      const auto o = static_cast<int>(other(rng));
      y = o >= clean ? o + 1 : o;
    }
    labels[r] = y;
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.classes; ++c) names.push_back(std::to_string(c));
  out.data = detail::all_labeled(std::move(x), std::move(labels), std::move(names));
  return out;
}

/// Sidecar describing the generating rule and ground-truth informative set.
inline nlohmann::json metadata_json(const SyntheticDataset& s) {
  nlohmann::json w = nlohmann::json::array();
  for (std::size_t k = 0; k < s.rule.weights.rows(); ++k) {
    const auto row = s.rule.weights.row(k);
    w.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"version", 1},
          {"generator", "sparse-linear-threshold"},
          {"n", s.spec.n},
          {"dimension", s.spec.dimension},
          {"classes", s.spec.classes},
          {"noise", s.spec.noise},
          {"margin", s.spec.margin},
          {"seed", s.spec.seed},
          {"informative", s.rule.informative},
          {"weights", w},
          {"dataset_hash", dataset_hash(s.data)}};
}

}  // namespace sewil
