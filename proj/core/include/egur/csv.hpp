#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace egur::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws std::out_of_range for a missing column.
  std::size_t column(const std::string& name) const;
};

std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);  // "n/a" when empty
std::optional<double> parse_optional(const std::string& cell);

std::string to_string(const Table& table);
Table parse(const std::string& text);
void write_file(const Table& table, const std::filesystem::path& path);
Table read_file(const std::filesystem::path& path);

}  // namespace egur::csv
