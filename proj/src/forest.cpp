#include "rfimp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfimp/error.hpp"

namespace rfimp {

FeatureMatrix::FeatureMatrix(std::vector<std::vector<double>> columns,
                             std::vector<FeatureInfo> info)
    : columns_(std::move(columns)), info_(std::move(info)) {
  if (columns_.size() != info_.size())
    throw Error("forest", "feature matrix: column and info counts differ");
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t f = 0; f < columns_.size(); ++f) {
    if (columns_[f].size() != n_rows_) throw Error("forest", "feature matrix: ragged columns");
    for (double v : columns_[f]) {
      if (std::isnan(v)) throw Error("forest", "feature matrix contains a missing cell");
      if (info_[f].kind == ColumnKind::Categorical &&
          (v < 0 || v >= static_cast<double>(info_[f].n_levels)))
        throw Error("forest", "feature matrix: category index out of range");
    }
  }
}

FeatureMatrix FeatureMatrix::from_dataset(const Dataset& ds,
                                          std::span<const std::size_t> columns) {
  std::vector<std::vector<double>> cols;
  std::vector<FeatureInfo> info;
  for (std::size_t c : columns) {
    const Column& col = ds.column(c);
    if (!col.complete())
      throw Error("forest", "predictor column \"" + col.name() + "\" has missing cells");
    cols.emplace_back(col.values().begin(), col.values().end());
    info.push_back({col.kind(), col.spec().n_levels()});
  }
  return FeatureMatrix(std::move(cols), std::move(info));
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.info_ = info_;
  out.n_rows_ = rows.size();
  out.columns_.resize(columns_.size());
  for (std::size_t f = 0; f < columns_.size(); ++f) {
    auto& dst = out.columns_[f];
    dst.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) dst[i] = columns_[f].at(rows[i]);
  }
  return out;
}

std::size_t Tree::n_leaves() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::size_t Tree::leaf_index(const FeatureMatrix& x, std::size_t row) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const Node& n = nodes_[i];
    const double v = x.at(row, n.feature);
    bool left;
    if (n.categorical)
      left = (n.left_levels >> static_cast<unsigned>(v)) & 1ULL;
    else
      left = v <= n.threshold;
    i = static_cast<std::size_t>(left ? n.left : n.right);
  }
  return i;
}

std::span<const double> Tree::leaf_counts(std::size_t leaf, std::size_t n_classes) const {
  return std::span<const double>(leaf_counts_).subspan(nodes_[leaf].leaf_slot * n_classes,
                                                        n_classes);
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, Task task,
              std::size_t n_classes, std::size_t mtry, std::size_t min_node_size,
              std::optional<std::size_t> max_depth, Rng& rng)
      : x_(x),
        y_(y),
        task_(task),
        n_classes_(n_classes),
        mtry_(mtry),
        min_node_size_(min_node_size),
        max_depth_(max_depth),
        rng_(rng),
        features_(x.n_features()) {}

  Tree build(std::vector<std::uint32_t> samples) {
    samples_ = std::move(samples);
    tree_ = Tree{};
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;
    std::uint64_t left_levels = 0;
    double score = 0.0;
  };

  struct Pair {
    double x;
    double y;
  };

  std::int32_t make_leaf(std::size_t begin, std::size_t end) {
    Tree::Node node;
    node.n_samples = static_cast<std::uint32_t>(end - begin);
    if (task_ == Task::Regression) {
      double s = 0;
      for (std::size_t i = begin; i < end; ++i) s += y_[samples_[i]];
      node.value = s / static_cast<double>(end - begin);
    } else {
      node.leaf_slot = static_cast<std::uint32_t>(tree_.leaf_counts_.size() / n_classes_);
      tree_.leaf_counts_.resize(tree_.leaf_counts_.size() + n_classes_, 0.0);
      double* counts = tree_.leaf_counts_.data() + node.leaf_slot * n_classes_;
      for (std::size_t i = begin; i < end; ++i) counts[static_cast<std::size_t>(y_[samples_[i]])] += 1;
    }
    tree_.nodes_.push_back(node);
    return static_cast<std::int32_t>(tree_.nodes_.size() - 1);
  }

  bool is_pure(std::size_t begin, std::size_t end) const {
    const double first = y_[samples_[begin]];
    for (std::size_t i = begin + 1; i < end; ++i)
      if (y_[samples_[i]] != first) return false;
    return true;
  }

  // Score = sum over children of (sum y)^2 / n for regression, or of
  // sum_k count_k^2 / n for classification. Maximising it is equivalent to
  // maximising variance reduction / Gini decrease.
  double parent_score(std::size_t begin, std::size_t end) const {
    const double n = static_cast<double>(end - begin);
    if (task_ == Task::Regression) {
      double s = 0;
      for (std::size_t i = begin; i < end; ++i) s += y_[samples_[i]];
      return s * s / n;
    }
    std::vector<double> counts(n_classes_, 0.0);
    for (std::size_t i = begin; i < end; ++i) counts[static_cast<std::size_t>(y_[samples_[i]])] += 1;
    double sq = 0;
    for (double c : counts) sq += c * c;
    return sq / n;
  }

  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t n = end - begin;
    if (n < 2 * min_node_size_ || is_pure(begin, end) || (max_depth_ && depth >= *max_depth_))
      return make_leaf(begin, end);

    Split best;
    best.score = parent_score(begin, end);
    const double tolerance = 1e-12 * std::max(1.0, std::abs(best.score));
    const double baseline = best.score + tolerance;
    best.score = baseline;

    for (const std::size_t f : draw_features()) {
      if (x_.info(f).kind == ColumnKind::Categorical)
        search_categorical(f, begin, end, best);
      else
        search_continuous(f, begin, end, best);
    }
    if (!best.found) return make_leaf(begin, end);

    auto goes_left = [&](std::uint32_t s) {
      const double v = x_.at(s, best.feature);
      if (best.categorical) return ((best.left_levels >> static_cast<unsigned>(v)) & 1ULL) != 0;
      return v <= best.threshold;
    };
    auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                              samples_.begin() + static_cast<std::ptrdiff_t>(end), goes_left);
    const std::size_t split = static_cast<std::size_t>(mid - samples_.begin());
    if (split == begin || split == end) return make_leaf(begin, end);

    Tree::Node node;
    node.feature = static_cast<std::uint32_t>(best.feature);
    node.categorical = best.categorical;
    node.threshold = best.threshold;
    node.left_levels = best.left_levels;
    node.n_samples = static_cast<std::uint32_t>(n);
    tree_.nodes_.push_back(node);
    const auto self = static_cast<std::size_t>(tree_.nodes_.size() - 1);
    const std::int32_t left = grow(begin, split, depth + 1);
    const std::int32_t right = grow(split, end, depth + 1);
    tree_.nodes_[self].left = left;
    tree_.nodes_[self].right = right;
    return static_cast<std::int32_t>(self);
  }

  // mtry features without replacement, visited in ascending index order so
  // equal gains resolve to the lowest feature index.
  std::span<const std::size_t> draw_features() {
    const std::size_t p = features_.size();
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry_; ++i) std::swap(features_[i], features_[i + uniform_index(rng_, p - i)]);
    std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    return std::span<const std::size_t>(features_).first(mtry_);
  }

  void search_continuous(std::size_t f, std::size_t begin, std::size_t end, Split& best) {
    const std::size_t n = end - begin;
    pairs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t s = samples_[begin + i];
      pairs_[i] = {x_.at(s, f), y_[s]};
    }
    std::sort(pairs_.begin(), pairs_.end(), [](const Pair& a, const Pair& b) { return a.x < b.x; });
    if (pairs_.front().x == pairs_.back().x) return;

    auto consider = [&](std::size_t i, double score) {
      if (score > best.score) {
        const double lo = pairs_[i].x;
        const double hi = pairs_[i + 1].x;
        double mid = lo + (hi - lo) / 2;
        if (!(mid < hi)) mid = lo;
        best = Split{true, f, false, mid, 0, score};
      }
    };

    if (task_ == Task::Regression) {
      double total = 0;
      for (const auto& p : pairs_) total += p.y;
      double left = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left += pairs_[i].y;
        if (pairs_[i].x == pairs_[i + 1].x) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double right = total - left;
        consider(i, left * left / nl + right * right / nr);
      }
      return;
    }

    left_counts_.assign(n_classes_, 0.0);
    right_counts_.assign(n_classes_, 0.0);
    for (const auto& p : pairs_) right_counts_[static_cast<std::size_t>(p.y)] += 1;
    double sq_left = 0;
    double sq_right = 0;
    for (double c : right_counts_) sq_right += c * c;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto k = static_cast<std::size_t>(pairs_[i].y);
      sq_left += 2 * left_counts_[k] + 1;
      left_counts_[k] += 1;
      sq_right -= 2 * right_counts_[k] - 1;
      right_counts_[k] -= 1;
      if (pairs_[i].x == pairs_[i + 1].x) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = static_cast<double>(n - i - 1);
      consider(i, sq_left / nl + sq_right / nr);
    }
  }

  // Levels are ordered by mean response (regression) or by the share of one
  // class (classification, each class in turn when there are more than two);
  // only prefixes of that ordering are evaluated.
  void search_categorical(std::size_t f, std::size_t begin, std::size_t end, Split& best) {
    const std::size_t n_levels = x_.info(f).n_levels;
    const std::size_t width = task_ == Task::Regression ? 2 : n_classes_;
    level_stats_.assign(n_levels * width, 0.0);
    level_n_.assign(n_levels, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t s = samples_[i];
      const auto level = static_cast<std::size_t>(x_.at(s, f));
      level_n_[level] += 1;
      if (task_ == Task::Regression)
        level_stats_[level * width] += y_[s];
      else
        level_stats_[level * width + static_cast<std::size_t>(y_[s])] += 1;
    }
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < n_levels; ++l)
      if (level_n_[l] > 0) present.push_back(l);
    if (present.size() < 2) return;

    auto sweep = [&](const std::vector<std::size_t>& order) {
      const double n = static_cast<double>(end - begin);
      std::uint64_t mask = 0;
      double nl = 0;
      if (task_ == Task::Regression) {
        double total = 0;
        for (std::size_t l : order) total += level_stats_[l * width];
        double left = 0;
        for (std::size_t j = 0; j + 1 < order.size(); ++j) {
          const std::size_t l = order[j];
          mask |= 1ULL << l;
          left += level_stats_[l * width];
          nl += level_n_[l];
          const double right = total - left;
          const double score = left * left / nl + right * right / (n - nl);
          if (score > best.score) best = Split{true, f, true, 0.0, mask, score};
        }
        return;
      }
      std::vector<double> lc(n_classes_, 0.0);
      std::vector<double> rc(n_classes_, 0.0);
      for (std::size_t l : order)
        for (std::size_t k = 0; k < n_classes_; ++k) rc[k] += level_stats_[l * width + k];
      for (std::size_t j = 0; j + 1 < order.size(); ++j) {
        const std::size_t l = order[j];
        mask |= 1ULL << l;
        nl += level_n_[l];
        double sql = 0;
        double sqr = 0;
        for (std::size_t k = 0; k < n_classes_; ++k) {
          lc[k] += level_stats_[l * width + k];
          rc[k] -= level_stats_[l * width + k];
          sql += lc[k] * lc[k];
          sqr += rc[k] * rc[k];
        }
        const double score = sql / nl + sqr / (n - nl);
        if (score > best.score) best = Split{true, f, true, 0.0, mask, score};
      }
    };

    auto ordered_by = [&](auto key) {
      std::vector<std::size_t> order = present;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
      return order;
    };

    if (task_ == Task::Regression) {
      sweep(ordered_by([&](std::size_t l) { return level_stats_[l * width] / level_n_[l]; }));
      return;
    }
    const std::size_t first_class = n_classes_ == 2 ? 1 : 0;
    for (std::size_t k = first_class; k < n_classes_; ++k)
      sweep(ordered_by([&](std::size_t l) { return level_stats_[l * width + k] / level_n_[l]; }));
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  Task task_;
  std::size_t n_classes_;
  std::size_t mtry_;
  std::size_t min_node_size_;
  std::optional<std::size_t> max_depth_;
  Rng& rng_;

  Tree tree_;
  std::vector<std::uint32_t> samples_;
  std::vector<std::size_t> features_;
  std::vector<Pair> pairs_;
  std::vector<double> left_counts_;
  std::vector<double> right_counts_;
  std::vector<double> level_stats_;
  std::vector<double> level_n_;
};

Forest Forest::fit(const FeatureMatrix& x, std::span<const double> y, Task task,
                   const ForestParams& params, std::size_t n_classes) {
  const std::size_t n = x.n_rows();
  const std::size_t p = x.n_features();
  if (p == 0) throw Error("forest", "empty feature set");
  if (y.size() != n) throw Error("forest", "target length does not match feature rows");
  if (n < 2) throw Error("forest", "at least two training rows are required");
  if (params.n_trees < 1) throw Error("forest", "n_trees must be at least 1");
  for (const auto& info : x.infos())
    if (info.kind == ColumnKind::Categorical && info.n_levels > kMaxCategoricalLevels)
      throw Error("forest", "categorical predictors with more than " +
                                std::to_string(kMaxCategoricalLevels) + " levels are not supported");
  if (task == Task::Classification) {
    if (n_classes < 1) throw Error("forest", "classification requires n_classes >= 1");
    for (double v : y)
      if (!(v >= 0) || v >= static_cast<double>(n_classes) || v != std::floor(v))
        throw Error("forest", "class label out of range");
  } else {
    for (double v : y)
      if (!std::isfinite(v)) throw Error("forest", "target contains a non-finite value");
    n_classes = 0;
  }

  Forest forest;
  forest.task_ = task;
  forest.n_classes_ = n_classes;
  forest.n_train_ = n;
  forest.params_ = params;
  forest.features_ = x.infos();
  forest.mtry_ = params.mtry.value_or(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))))));
  if (forest.mtry_ < 1 || forest.mtry_ > p)
    throw Error("forest", "mtry must lie in [1, " + std::to_string(p) + "]");
  forest.min_node_size_ =
      params.min_node_size.value_or(task == Task::Regression ? std::size_t{5} : std::size_t{1});
  if (forest.min_node_size_ < 1) throw Error("forest", "min_node_size must be at least 1");

  forest.trees_.reserve(params.n_trees);
  forest.inbag_.reserve(params.n_trees);
  std::vector<std::uint32_t> samples(n);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.rng_seed, {t}));
    std::vector<std::uint32_t> counts(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::uint32_t>(uniform_index(rng, n));
      samples[i] = r;
      ++counts[r];
    }
    TreeBuilder builder(x, y, task, n_classes, forest.mtry_, forest.min_node_size_,
                        params.max_depth, rng);
    forest.trees_.push_back(builder.build(samples));
    forest.inbag_.push_back(std::move(counts));
  }
  return forest;
}

void Forest::check_schema(const FeatureMatrix& x) const {
  if (x.n_features() != features_.size())
    throw Error("forest", "expected " + std::to_string(features_.size()) + " features, got " +
                              std::to_string(x.n_features()));
  for (std::size_t f = 0; f < features_.size(); ++f)
    if (x.info(f).kind != features_[f].kind || x.info(f).n_levels != features_[f].n_levels)
      throw Error("forest", "feature " + std::to_string(f) + " does not match the training schema");
}

double Forest::tree_value(std::size_t t, const FeatureMatrix& x, std::size_t row) const {
  const Tree& tree = trees_[t];
  return tree.node(tree.leaf_index(x, row)).value;
}

void Forest::tree_frequencies(std::size_t t, const FeatureMatrix& x, std::size_t row,
                              std::span<double> out) const {
  const Tree& tree = trees_[t];
  const auto counts = tree.leaf_counts(tree.leaf_index(x, row), n_classes_);
  double total = 0;
  for (double c : counts) total += c;
  for (std::size_t k = 0; k < n_classes_; ++k) out[k] = counts[k] / total;
}

std::vector<double> Forest::predict(const FeatureMatrix& x) const {
  if (task_ != Task::Regression) throw Error("forest", "predict() requires a regression forest");
  check_schema(x);
  std::vector<double> out(x.n_rows(), 0.0);
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    double s = 0;
    for (std::size_t t = 0; t < trees_.size(); ++t) s += tree_value(t, x, r);
    out[r] = s / static_cast<double>(trees_.size());
  }
  return out;
}

std::vector<double> Forest::predict_proba(const FeatureMatrix& x) const {
  if (task_ != Task::Classification)
    throw Error("forest", "predict_proba() requires a classification forest");
  check_schema(x);
  std::vector<double> out(x.n_rows() * n_classes_, 0.0);
  std::vector<double> freq(n_classes_);
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    double* row = out.data() + r * n_classes_;
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      tree_frequencies(t, x, r, freq);
      for (std::size_t k = 0; k < n_classes_; ++k) row[k] += freq[k];
    }
    for (std::size_t k = 0; k < n_classes_; ++k) row[k] /= static_cast<double>(trees_.size());
  }
  return out;
}

std::vector<std::size_t> Forest::predict_class(const FeatureMatrix& x) const {
  const auto proba = predict_proba(x);
  std::vector<std::size_t> out(x.n_rows());
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    const auto* row = proba.data() + r * n_classes_;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + n_classes_) - row);
  }
  return out;
}

std::optional<double> Forest::oob_predict(const FeatureMatrix& x_train, std::size_t row) const {
  if (task_ != Task::Regression) throw Error("forest", "oob_predict() requires a regression forest");
  if (row >= n_train_) throw Error("forest", "row is not a training row");
  double s = 0;
  std::size_t k = 0;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    if (inbag_[t][row]) continue;
    s += tree_value(t, x_train, row);
    ++k;
  }
  if (k == 0) return std::nullopt;
  return s / static_cast<double>(k);
}

std::optional<std::vector<double>> Forest::oob_predict_proba(const FeatureMatrix& x_train,
                                                             std::size_t row) const {
  if (task_ != Task::Classification)
    throw Error("forest", "oob_predict_proba() requires a classification forest");
  if (row >= n_train_) throw Error("forest", "row is not a training row");
  std::vector<double> acc(n_classes_, 0.0);
  std::vector<double> freq(n_classes_);
  std::size_t k = 0;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    if (inbag_[t][row]) continue;
    tree_frequencies(t, x_train, row, freq);
    for (std::size_t c = 0; c < n_classes_; ++c) acc[c] += freq[c];
    ++k;
  }
  if (k == 0) return std::nullopt;
  for (double& a : acc) a /= static_cast<double>(k);
  return acc;
}

std::vector<std::optional<double>> Forest::oob_predict_all(const FeatureMatrix& x_train) const {
  check_schema(x_train);
  if (x_train.n_rows() != n_train_) throw Error("forest", "x_train row count mismatch");
  std::vector<std::optional<double>> out(n_train_);
  for (std::size_t r = 0; r < n_train_; ++r) out[r] = oob_predict(x_train, r);
  return out;
}

}  // namespace rfimp
