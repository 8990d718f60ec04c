#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace segsca {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based physical line number per row (header is line 1), for diagnostics.
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column(const std::string& name) const;
  std::size_t require_column(const std::string& name,
                             const std::string& file_label) const;
};

CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Shortest representation that round-trips exactly; used for every numeric
// value we write so reruns are byte-identical.
std::string format_double(double v);

// Strict finite-double parse; context appears in the error message.
double parse_double(const std::string& cell, const std::string& context);

// Empty cells and NA markers count as missing.
bool is_missing(const std::string& cell);

} // namespace segsca
