#include "oilid/csv.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oilid/errors.hpp"

namespace oilid::io {

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw SchemaError("missing column '" + std::string(name) + "'");
}

std::string format_number(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string to_csv_string(const CsvTable& table) {
  std::string out;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (k) out += ',';
    out += table.header[k];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += format_number(row[k]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

CsvTable parse_csv(std::string_view text, std::string_view source) {
  CsvTable table;
  std::size_t pos = 0;
  long row = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++row;
    if (line.empty()) continue;
    auto cells = split(line);
    if (!have_header) {
      for (auto c : cells) table.header.emplace_back(trim(c));
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw SchemaError(std::string(source) + ": expected " + std::to_string(table.header.size()) +
                            " columns, found " + std::to_string(cells.size()),
                        row);
    }
    std::vector<double> values;
    values.reserve(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      auto cell = trim(cells[k]);
      double v = 0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw SchemaError(std::string(source) + ": non-numeric value '" + std::string(cell) +
                              "' in column '" + table.header[k] + "'",
                          row);
      }
      values.push_back(v);
    }
    table.rows.push_back(std::move(values));
  }
  if (!have_header) throw SchemaError(std::string(source) + ": empty file");
  return table;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    std::string_view source) {
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (k >= table.header.size())
      throw SchemaError(std::string(source) + ": missing column '" + expected[k] + "'");
    if (table.header[k] != expected[k])
      throw SchemaError(std::string(source) + ": column " + std::to_string(k + 1) + " is '" +
                        table.header[k] + "', expected '" + expected[k] + "'");
  }
  if (table.header.size() != expected.size())
    throw SchemaError(std::string(source) + ": unexpected extra column '" +
                      table.header[expected.size()] + "'");
}

void write_text_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ModelError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace oilid::io
