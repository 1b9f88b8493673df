#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace parkcast::csv {

// A header row plus data rows. Quoted fields follow RFC 4180 ("" escapes a quote).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  // Like column() but throws SchemaError naming the missing column.
  std::size_t require(std::string_view name) const;
};

// Throws ParseError (byte offset of the offending row) on ragged rows or an
// unterminated quote. A UTF-8 BOM is skipped.
Table parse(std::string_view text);

std::string render(const Table& table);

std::string escape(std::string_view field);

// Shortest text that reads back to the same double.
std::string format_double(double v);

// Parses a whole field as a double; throws ArgumentError otherwise.
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

}  // namespace parkcast::csv
