#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfimp {

enum class ColumnKind { Continuous, Categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> levels;  // Categorical only

  static ColumnSpec continuous(std::string name);
  static ColumnSpec categorical(std::string name, std::vector<std::string> levels);

  bool is_categorical() const noexcept { return kind == ColumnKind::Categorical; }
  std::size_t n_levels() const noexcept { return levels.size(); }
  /// Index of `label` among the levels, if declared.
  std::optional<std::size_t> level_index(std::string_view label) const;

  /// Throws rfimp::Error on an empty name, or empty/duplicate levels.
  void validate() const;

  bool operator==(const ColumnSpec&) const = default;
};

/// One typed column. Categorical cells store the level index as a double so
/// the forest sees a uniform numeric view. Missing cells hold NaN internally
/// and are never handed out through get().
class Column {
 public:
  Column() = default;
  Column(ColumnSpec spec, std::vector<double> values, std::vector<std::uint8_t> missing);
  /// Fully observed column.
  Column(ColumnSpec spec, std::vector<double> values);
  /// Column of n missing cells.
  static Column all_missing(ColumnSpec spec, std::size_t n);

  const ColumnSpec& spec() const noexcept { return spec_; }
  const std::string& name() const noexcept { return spec_.name; }
  ColumnKind kind() const noexcept { return spec_.kind; }
  std::size_t size() const noexcept { return values_.size(); }

  bool is_missing(std::size_t row) const { return missing_[row] != 0; }
  std::optional<double> get(std::size_t row) const;
  /// Value of an observed cell; throws if the cell is missing.
  double at(std::size_t row) const;

  void set(std::size_t row, double value);
  void set_missing(std::size_t row);

  std::size_t n_missing() const noexcept;
  bool complete() const noexcept { return n_missing() == 0; }
  std::vector<std::size_t> observed_rows() const;
  std::vector<std::size_t> missing_rows() const;
  std::vector<double> observed_values() const;

  /// Raw storage; missing cells read as NaN.
  std::span<const double> values() const noexcept { return values_; }
  std::span<const std::uint8_t> missing_mask() const noexcept { return missing_; }

  bool operator==(const Column& other) const;

 private:
  void check_value(double v) const;

  ColumnSpec spec_;
  std::vector<double> values_;
  std::vector<std::uint8_t> missing_;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }

  const Column& column(std::size_t index) const { return columns_.at(index); }
  const Column& column(std::string_view name) const { return columns_[index_of(name)]; }
  Column& mutable_column(std::size_t index) { return columns_.at(index); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::vector<ColumnSpec> specs() const;
  std::vector<std::string> names() const;

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws rfimp::Error when the column does not exist.
  std::size_t index_of(std::string_view name) const;

  void add_column(Column column);

  bool complete() const noexcept;
  std::size_t n_missing() const noexcept;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  /// Rows observed in every one of `names` (all columns when empty).
  Dataset complete_cases(std::span<const std::string> names = {}) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

/// out[i] = a[i] * b[i], missing when either factor is missing.
Dataset add_product_column(const Dataset& ds, std::string_view a, std::string_view b,
                           std::string out);

}  // namespace rfimp
