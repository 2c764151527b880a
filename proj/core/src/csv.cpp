#include "egur/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "egur/error.hpp"

namespace egur::csv {

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("no column " + name);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string("n/a");
}

std::optional<double> parse_optional(const std::string& cell) {
  if (cell == "n/a" || cell.empty()) return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(cell, &used);
  if (used != cell.size()) throw DataError("bad number '" + cell + "'");
  return v;
}

namespace {

std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += quote(cells[i]);
  }
  out += '\n';
}

}  // namespace

std::string to_string(const Table& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::logic_error("csv row width mismatch");
    append_row(out, row);
  }
  return out;
}

Table parse(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
      continue;
    }
    switch (ch) {
      case '"': quoted = true; any = true; break;
      case ',': row.push_back(std::move(cell)); cell.clear(); any = true; break;
      case '\r': break;
      case '\n':
        if (any || !cell.empty()) {
          row.push_back(std::move(cell));
          records.push_back(std::move(row));
        }
        row.clear();
        cell.clear();
        any = false;
        break;
      default: cell += ch; any = true;
    }
  }
  if (quoted) throw DataError("unterminated quote in csv");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    records.push_back(std::move(row));
  }
  if (records.empty()) throw DataError("empty csv");
  Table table;
  table.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size()) {
      throw DataError("csv row " + std::to_string(i + 1) + " has " + std::to_string(records[i].size()) +
                      " cells, expected " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[i]));
  }
  return table;
}

void write_file(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_string(table);
  if (!out) throw DataError("write failed: " + path.string());
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("file not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

}  // namespace egur::csv
