#pragma once

// Minimal CSV reading shared by ingestion and geo aggregation. Plain comma
// separation, no quoting (none of our formats needs it), tolerant of CRLF
// and surrounding whitespace in cells.

#include <string>
#include <vector>

namespace nhdp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by header name, -1 when absent.
  int col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

double parse_double_cell(const std::string& cell, const std::string& context);
long parse_long_cell(const std::string& cell, const std::string& context);

}  // namespace nhdp
