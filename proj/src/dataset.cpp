#include "rfimp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "rfimp/error.hpp"

namespace rfimp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ColumnSpec ColumnSpec::continuous(std::string name) {
  return ColumnSpec{std::move(name), ColumnKind::Continuous, {}};
}

ColumnSpec ColumnSpec::categorical(std::string name, std::vector<std::string> levels) {
  ColumnSpec spec{std::move(name), ColumnKind::Categorical, std::move(levels)};
  spec.validate();
  return spec;
}

std::optional<std::size_t> ColumnSpec::level_index(std::string_view label) const {
  auto it = std::find(levels.begin(), levels.end(), label);
  if (it == levels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - levels.begin());
}

void ColumnSpec::validate() const {
  if (name.empty()) throw Error("data", "column name must be non-empty");
  if (kind == ColumnKind::Continuous) {
    if (!levels.empty()) throw Error("data", "continuous column \"" + name + "\" declares levels");
    return;
  }
  if (levels.empty()) throw Error("data", "categorical column \"" + name + "\" has no levels");
  std::unordered_set<std::string> seen;
  for (const auto& l : levels) {
    if (l.empty()) throw Error("data", "categorical column \"" + name + "\" has an empty level");
    if (!seen.insert(l).second)
      throw Error("data", "categorical column \"" + name + "\" repeats level \"" + l + "\"");
  }
}

Column::Column(ColumnSpec spec, std::vector<double> values, std::vector<std::uint8_t> missing)
    : spec_(std::move(spec)), values_(std::move(values)), missing_(std::move(missing)) {
  spec_.validate();
  if (values_.size() != missing_.size())
    throw Error("data", "column \"" + spec_.name + "\": values and mask differ in length");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (missing_[i]) {
      missing_[i] = 1;
      values_[i] = kNaN;
    } else {
      check_value(values_[i]);
    }
  }
}

Column::Column(ColumnSpec spec, std::vector<double> values)
    : Column(std::move(spec), values, std::vector<std::uint8_t>(values.size(), 0)) {}

Column Column::all_missing(ColumnSpec spec, std::size_t n) {
  return Column(std::move(spec), std::vector<double>(n, kNaN), std::vector<std::uint8_t>(n, 1));
}

void Column::check_value(double v) const {
  if (std::isnan(v))
    throw Error("data", "column \"" + spec_.name + "\": NaN stored in an observed cell");
  if (spec_.is_categorical()) {
    if (v < 0 || v != std::floor(v) || v >= static_cast<double>(spec_.n_levels()))
      throw Error("data", "column \"" + spec_.name + "\": invalid category index " +
                              std::to_string(v));
  }
}

std::optional<double> Column::get(std::size_t row) const {
  if (missing_.at(row)) return std::nullopt;
  return values_[row];
}

double Column::at(std::size_t row) const {
  if (missing_.at(row))
    throw Error("data", "column \"" + spec_.name + "\": row " + std::to_string(row) +
                            " is missing");
  return values_[row];
}

void Column::set(std::size_t row, double value) {
  check_value(value);
  values_.at(row) = value;
  missing_[row] = 0;
}

void Column::set_missing(std::size_t row) {
  values_.at(row) = kNaN;
  missing_[row] = 1;
}

std::size_t Column::n_missing() const noexcept {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), 1));
}

std::vector<std::size_t> Column::observed_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < missing_.size(); ++i)
    if (!missing_[i]) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> Column::missing_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < missing_.size(); ++i)
    if (missing_[i]) rows.push_back(i);
  return rows;
}

std::vector<double> Column::observed_values() const {
  std::vector<double> out;
  out.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!missing_[i]) out.push_back(values_[i]);
  return out;
}

bool Column::operator==(const Column& other) const {
  if (spec_ != other.spec_ || missing_ != other.missing_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!missing_[i] && values_[i] != other.values_[i]) return false;
  return true;
}

Dataset::Dataset(std::vector<Column> columns) {
  for (auto& c : columns) add_column(std::move(c));
}

std::vector<ColumnSpec> Dataset::specs() const {
  std::vector<ColumnSpec> out;
  for (const auto& c : columns_) out.push_back(c.spec());
  return out;
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.name());
  return out;
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name() == name) return i;
  return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error("data", "no column named \"" + std::string(name) + "\"");
}

void Dataset::add_column(Column column) {
  if (find(column.name()))
    throw Error("data", "duplicate column name \"" + column.name() + "\"");
  if (columns_.empty())
    n_rows_ = column.size();
  else if (column.size() != n_rows_)
    throw Error("data", "column \"" + column.name() + "\" has " + std::to_string(column.size()) +
                            " rows, expected " + std::to_string(n_rows_));
  columns_.push_back(std::move(column));
}

bool Dataset::complete() const noexcept { return n_missing() == 0; }

std::size_t Dataset::n_missing() const noexcept {
  std::size_t n = 0;
  for (const auto& c : columns_) n += c.n_missing();
  return n;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Dataset out;
  for (const auto& c : columns_) {
    std::vector<double> v(rows.size());
    std::vector<std::uint8_t> m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t r = rows[i];
      if (r >= n_rows_) throw Error("data", "row index out of range");
      v[i] = c.values()[r];
      m[i] = c.missing_mask()[r];
    }
    out.add_column(Column(c.spec(), std::move(v), std::move(m)));
  }
  return out;
}

Dataset Dataset::complete_cases(std::span<const std::string> names) const {
  std::vector<std::size_t> cols;
  if (names.empty()) {
    for (std::size_t i = 0; i < columns_.size(); ++i) cols.push_back(i);
  } else {
    for (const auto& n : names) cols.push_back(index_of(n));
  }
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    bool ok = true;
    for (std::size_t c : cols) ok = ok && !columns_[c].is_missing(r);
    if (ok) keep.push_back(r);
  }
  return select_rows(keep);
}

Dataset add_product_column(const Dataset& ds, std::string_view a, std::string_view b,
                           std::string out) {
  const Column& ca = ds.column(a);
  const Column& cb = ds.column(b);
  if (ca.kind() != ColumnKind::Continuous || cb.kind() != ColumnKind::Continuous)
    throw Error("data", "product column requires continuous inputs");
  const std::size_t n = ds.n_rows();
  std::vector<double> v(n, kNaN);
  std::vector<std::uint8_t> m(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (ca.is_missing(i) || cb.is_missing(i))
      m[i] = 1;
    else
      v[i] = ca.values()[i] * cb.values()[i];
  }
  Dataset result = ds;
  result.add_column(Column(ColumnSpec::continuous(std::move(out)), std::move(v), std::move(m)));
  return result;
}

}  // namespace rfimp
