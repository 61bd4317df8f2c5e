#include "rfimp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rfimp/error.hpp"

namespace rfimp {

namespace {

using Record = std::vector<std::string>;

// RFC-4180 records: quoted fields may contain commas, doubled quotes and
// line breaks. Accepts LF or CRLF line endings.
std::vector<Record> parse_records(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        current.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          current.push_back(std::move(field));
          records.push_back(std::move(current));
        }
        field.clear();
        current.clear();
        any = false;
        break;
      default:
        field.push_back(ch);
        any = true;
    }
  }
  if (in_quotes) throw Error("data", "unterminated quoted field");
  if (any || !field.empty()) {
    current.push_back(std::move(field));
    records.push_back(std::move(current));
  }
  return records;
}

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

bool is_missing_cell(std::string_view cell, std::string_view token) {
  return cell.empty() || cell == token;
}

Dataset build(const std::vector<Record>& records, std::span<const ColumnSpec> specs,
              std::string_view missing_token) {
  if (records.empty()) throw Error("data", "missing header row");
  const Record& header = records.front();
  if (header.size() != specs.size())
    throw Error("data", "header has " + std::to_string(header.size()) + " columns, expected " +
                            std::to_string(specs.size()));
  std::vector<const ColumnSpec*> ordered;
  for (const auto& name : header) {
    const ColumnSpec* match = nullptr;
    for (const auto& s : specs)
      if (s.name == name) match = &s;
    if (!match) throw Error("data", "header column \"" + name + "\" has no column spec");
    for (const auto* o : ordered)
      if (o == match) throw Error("data", "header repeats column \"" + name + "\"");
    ordered.push_back(match);
  }

  const std::size_t n = records.size() - 1;
  std::vector<std::vector<double>> values(header.size(), std::vector<double>(n, 0.0));
  std::vector<std::vector<std::uint8_t>> missing(header.size(), std::vector<std::uint8_t>(n, 0));
  for (std::size_t r = 0; r < n; ++r) {
    const Record& rec = records[r + 1];
    if (rec.size() != header.size())
      throw ParseError(r + 1, header.back(),
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(rec.size()));
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& cell = rec[c];
      if (is_missing_cell(cell, missing_token)) {
        missing[c][r] = 1;
        continue;
      }
      const ColumnSpec& spec = *ordered[c];
      if (spec.is_categorical()) {
        auto idx = spec.level_index(cell);
        if (!idx) throw ParseError(r + 1, spec.name, "unknown level \"" + cell + "\"");
        values[c][r] = static_cast<double>(*idx);
      } else {
        auto v = parse_number(cell);
        if (!v) throw ParseError(r + 1, spec.name, "cannot parse \"" + cell + "\" as a number");
        values[c][r] = *v;
      }
    }
  }

  Dataset ds;
  for (std::size_t c = 0; c < header.size(); ++c)
    ds.add_column(Column(*ordered[c], std::move(values[c]), std::move(missing[c])));
  return ds;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("data", "cannot open \"" + path.string() + "\" for reading");
  return in;
}

void write_field(std::ostream& out, std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char ch : s) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Dataset read_csv(std::istream& in, std::span<const ColumnSpec> specs,
                 std::string_view missing_token) {
  for (const auto& s : specs) s.validate();
  return build(parse_records(in), specs, missing_token);
}

Dataset read_csv(const std::filesystem::path& path, std::span<const ColumnSpec> specs,
                 std::string_view missing_token) {
  auto in = open_input(path);
  return read_csv(in, specs, missing_token);
}

Dataset read_csv_inferred(std::istream& in, std::span<const ColumnSpec> overrides,
                          std::string_view missing_token) {
  const auto records = parse_records(in);
  if (records.empty()) throw Error("data", "missing header row");
  const Record& header = records.front();
  std::vector<ColumnSpec> specs;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const ColumnSpec* given = nullptr;
    for (const auto& o : overrides)
      if (o.name == header[c]) given = &o;
    if (given) {
      specs.push_back(*given);
      continue;
    }
    bool numeric = true;
    std::vector<std::string> levels;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (c >= records[r].size()) continue;
      const std::string& cell = records[r][c];
      if (is_missing_cell(cell, missing_token)) continue;
      if (numeric && !parse_number(cell)) numeric = false;
      if (std::find(levels.begin(), levels.end(), cell) == levels.end()) levels.push_back(cell);
    }
    if (numeric)
      specs.push_back(ColumnSpec::continuous(header[c]));
    else
      specs.push_back(ColumnSpec::categorical(header[c], std::move(levels)));
  }
  for (const auto& o : overrides) {
    bool found = false;
    for (const auto& h : header) found = found || h == o.name;
    if (!found) throw Error("data", "column spec \"" + o.name + "\" not present in header");
  }
  return build(records, specs, missing_token);
}

Dataset read_csv_inferred(const std::filesystem::path& path,
                          std::span<const ColumnSpec> overrides, std::string_view missing_token) {
  auto in = open_input(path);
  return read_csv_inferred(in, overrides, missing_token);
}

void write_csv(const Dataset& ds, std::ostream& out, std::string_view missing_token) {
  const auto& cols = ds.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << ',';
    write_field(out, cols[c].name());
  }
  out << '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      const Column& col = cols[c];
      if (col.is_missing(r)) {
        out << missing_token;
      } else if (col.spec().is_categorical()) {
        write_field(out, col.spec().levels[static_cast<std::size_t>(col.values()[r])]);
      } else {
        out << format_double(col.values()[r]);
      }
    }
    out << '\n';
  }
}

void write_csv(const Dataset& ds, const std::filesystem::path& path,
               std::string_view missing_token) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("data", "cannot open \"" + path.string() + "\" for writing");
  write_csv(ds, out, missing_token);
  out.flush();
  if (!out) throw Error("data", "write to \"" + path.string() + "\" failed");
}

}  // namespace rfimp
