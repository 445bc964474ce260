#pragma once

#include <istream>
#include <string>
#include <vector>

#include "cetn/common.hpp"

namespace cetn {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

/// Comma-separated, UTF-8, optional RFC-4180 quoting ("" escapes a quote),
/// LF or CRLF line ends. The first record is the header. Every row must have
/// exactly as many cells as the header.
CsvTable parse_csv(std::istream& in, const std::string& origin = "<stream>");
CsvTable read_csv(const std::string& path);

}  // namespace cetn
