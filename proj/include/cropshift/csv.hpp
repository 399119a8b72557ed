#pragma once

// Minimal locale-independent CSV handling: header row, comma separator,
// optional double-quoted fields, '.' decimals, 17-significant-digit output.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cropshift::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of a header column; throws ParseError if missing.
  std::size_t require_column(std::string_view name, std::string_view source) const;
};

/// Parses a whole CSV stream. An empty stream yields an empty table.
/// Throws Error{ParseError} naming `source` and the line on ragged rows.
Table read(std::istream& in, std::string_view source);
Table read_file(const std::string& path);

std::vector<std::string> split_line(std::string_view line);

double parse_double(std::string_view text, std::string_view source, std::size_t line);
long long parse_int(std::string_view text, std::string_view source, std::size_t line);

/// Shortest text that round-trips, capped at 17 significant digits.
std::string format_double(double value);

/// Quotes a field only when it contains a separator, quote or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace cropshift::csv
