#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>

#include "rfimp/dataset.hpp"

namespace rfimp {

inline constexpr std::string_view kDefaultMissingToken = "NA";

/// Reads a header-first CSV. Header names must be exactly the names in
/// `specs` (any order); the result follows header order. Cells equal to
/// `missing_token` or empty are missing. Data rows are numbered from 1 in
/// error messages.
Dataset read_csv(std::istream& in, std::span<const ColumnSpec> specs,
                 std::string_view missing_token = kDefaultMissingToken);
Dataset read_csv(const std::filesystem::path& path, std::span<const ColumnSpec> specs,
                 std::string_view missing_token = kDefaultMissingToken);

/// Infers specs from content: a column whose non-missing cells all parse as
/// numbers is continuous, otherwise categorical with levels in order of first
/// appearance. `overrides` take precedence for the columns they name.
Dataset read_csv_inferred(std::istream& in, std::span<const ColumnSpec> overrides = {},
                          std::string_view missing_token = kDefaultMissingToken);
Dataset read_csv_inferred(const std::filesystem::path& path,
                          std::span<const ColumnSpec> overrides = {},
                          std::string_view missing_token = kDefaultMissingToken);

/// Continuous values are written in shortest round-trip form.
void write_csv(const Dataset& ds, std::ostream& out,
               std::string_view missing_token = kDefaultMissingToken);
void write_csv(const Dataset& ds, const std::filesystem::path& path,
               std::string_view missing_token = kDefaultMissingToken);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace rfimp
