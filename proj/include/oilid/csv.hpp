#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace oilid::io {

/// Numeric CSV: one header row, then rows of doubles.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const;  // throws SchemaError
};

/// Shortest round-trip decimal representation, independent of locale.
std::string format_number(double value);

std::string to_csv_string(const CsvTable& table);
CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");
CsvTable read_csv(const std::string& path);

/// Header must match `expected` exactly; the message names the first mismatch.
void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    std::string_view source);

/// Write to `path` via a sibling temporary file and rename.
void write_text_atomic(const std::string& path, std::string_view content);
std::string read_text(const std::string& path);

}  // namespace oilid::io
