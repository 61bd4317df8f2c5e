#pragma once

#include <stdexcept>
#include <string>

namespace rfimp {

// Messages carry a "<module>: " prefix so the CLI can report context verbatim.
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error("data", "row " + std::to_string(row) + ", column \"" + column + "\": " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace rfimp
