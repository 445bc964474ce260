#include "cetn/csv.hpp"

#include <fstream>

namespace cetn {

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> parse_record(const std::string& line, size_t line_no,
                                      const std::string& origin) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted) {
    throw IoError(origin + ":" + std::to_string(line_no) + ": unterminated quote");
  }
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& origin) {
  CsvTable table;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && table.header.empty()) continue;
    auto cells = parse_record(line, line_no, origin);
    if (table.header.empty()) {
      table.header = std::move(cells);
    } else {
      if (cells.size() != table.header.size()) {
        throw IoError(origin + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, got " +
                      std::to_string(cells.size()));
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (table.header.empty()) throw IoError(origin + ": empty csv");
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return parse_csv(in, path);
}

}  // namespace cetn
