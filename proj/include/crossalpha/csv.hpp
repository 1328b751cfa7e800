#pragma once

#include <string>
#include <vector>

namespace crossalpha {

/// One parsed CSV table: header names plus rows of raw string cells.
/// Fields are comma-separated with no quoting (the schemas used here never
/// embed commas); trailing CR from Windows line endings is stripped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based file line number per row, for error messages.
  std::vector<int> line_numbers;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

/// Parses a decimal cell; throws ParseError naming the line on failure.
double parse_double(const std::string& cell, int line);
long parse_long(const std::string& cell, int line);

/// Formats a double with enough digits to round-trip bit-exactly.
std::string format_double(double v);

}  // namespace crossalpha
