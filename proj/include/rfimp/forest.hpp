#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rfimp/dataset.hpp"
#include "rfimp/random.hpp"

namespace rfimp {

enum class Task { Regression, Classification };

inline constexpr std::size_t kMaxCategoricalLevels = 12;

struct FeatureInfo {
  ColumnKind kind = ColumnKind::Continuous;
  std::size_t n_levels = 0;
};

/// Column-major, fully observed predictor matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::vector<double>> columns, std::vector<FeatureInfo> info);

  /// Builds from the given dataset columns; throws if any cell is missing.
  static FeatureMatrix from_dataset(const Dataset& ds, std::span<const std::size_t> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_features() const noexcept { return columns_.size(); }
  double at(std::size_t row, std::size_t feature) const { return columns_[feature][row]; }
  std::span<const double> column(std::size_t feature) const { return columns_[feature]; }
  const FeatureInfo& info(std::size_t feature) const { return info_[feature]; }
  const std::vector<FeatureInfo>& infos() const noexcept { return info_; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::vector<double>> columns_;
  std::vector<FeatureInfo> info_;
  std::size_t n_rows_ = 0;
};

struct ForestParams {
  std::size_t n_trees = 10;
  std::optional<std::size_t> mtry;           // default floor(sqrt(p)), at least 1
  std::optional<std::size_t> min_node_size;  // default 5 regression, 1 classification
  std::optional<std::size_t> max_depth;      // unlimited when empty
  std::uint64_t rng_seed = 0;
};

/// Single CART tree stored as a flat node array; node 0 is the root.
class Tree {
 public:
  struct Node {
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::uint32_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;       // continuous: x <= threshold goes left
    std::uint64_t left_levels = 0;  // categorical: bit set -> left
    double value = 0.0;           // regression leaf mean
    std::uint32_t leaf_slot = 0;  // classification leaf counts offset / n_classes
    std::uint32_t n_samples = 0;

    bool is_leaf() const noexcept { return left < 0; }
  };

  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t n_leaves() const noexcept;

  /// Index of the leaf reached by `row` of `x`.
  std::size_t leaf_index(const FeatureMatrix& x, std::size_t row) const;
  /// Class counts of a classification leaf (one entry per class).
  std::span<const double> leaf_counts(std::size_t leaf, std::size_t n_classes) const;

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
  std::vector<double> leaf_counts_;
};

/// Random forest of CART trees with exact per-tree in-bag counts.
class Forest {
 public:
  /// Trains `params.n_trees` trees, each on a size-n bootstrap sample. For
  /// classification, `y` holds class indices in [0, n_classes).
  static Forest fit(const FeatureMatrix& x, std::span<const double> y, Task task,
                    const ForestParams& params, std::size_t n_classes = 0);

  Task task() const noexcept { return task_; }
  std::size_t n_trees() const noexcept { return trees_.size(); }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t n_features() const noexcept { return features_.size(); }
  std::size_t n_train() const noexcept { return n_train_; }
  std::size_t mtry() const noexcept { return mtry_; }
  std::size_t min_node_size() const noexcept { return min_node_size_; }
  const ForestParams& params() const noexcept { return params_; }
  const Tree& tree(std::size_t t) const { return trees_[t]; }

  /// How many times each training row appears in tree t's bootstrap sample.
  std::span<const std::uint32_t> inbag_counts(std::size_t t) const { return inbag_[t]; }
  bool in_bag(std::size_t t, std::size_t row) const { return inbag_[t][row] != 0; }

  /// Per-tree outputs for one row: regression leaf mean, or class frequencies
  /// normalised within the leaf.
  double tree_value(std::size_t t, const FeatureMatrix& x, std::size_t row) const;
  void tree_frequencies(std::size_t t, const FeatureMatrix& x, std::size_t row,
                        std::span<double> out) const;

  /// Regression: mean over all trees.
  std::vector<double> predict(const FeatureMatrix& x) const;
  /// Classification: row-major n_rows x n_classes probabilities.
  std::vector<double> predict_proba(const FeatureMatrix& x) const;
  std::vector<std::size_t> predict_class(const FeatureMatrix& x) const;

  /// Regression aggregate over only the trees for which `row` is out of bag;
  /// empty when the row is in bag for every tree.
  std::optional<double> oob_predict(const FeatureMatrix& x_train, std::size_t row) const;
  std::optional<std::vector<double>> oob_predict_proba(const FeatureMatrix& x_train,
                                                       std::size_t row) const;
  std::vector<std::optional<double>> oob_predict_all(const FeatureMatrix& x_train) const;

 private:
  void check_schema(const FeatureMatrix& x) const;

  Task task_ = Task::Regression;
  std::size_t n_classes_ = 0;
  std::size_t n_train_ = 0;
  std::size_t mtry_ = 1;
  std::size_t min_node_size_ = 1;
  ForestParams params_;
  std::vector<FeatureInfo> features_;
  std::vector<Tree> trees_;
  std::vector<std::vector<std::uint32_t>> inbag_;
};

}  // namespace rfimp
