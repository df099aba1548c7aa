#include "vecmatch/table.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vecmatch/errors.hpp"

namespace vecmatch {

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size()) {
    throw std::invalid_argument("row has " + std::to_string(cells.size()) +
                                " cells, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(cells));
}

std::size_t Table::col_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::invalid_argument("no column named '" + name + "'");
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw std::runtime_error("to_chars failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || static_cast<std::size_t>(end - begin) != text.size()) {
    throw ValidationError("cannot parse number: '" + text + "'");
  }
  return v;
}

void write_tsv(const Table& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out << '\t';
    out << t.columns[i];
  }
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << '\t';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

Table read_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.columns = split(line, '\t');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, '\t');
    if (cells.size() != t.columns.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected " + std::to_string(t.columns.size()) +
                            " fields, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace vecmatch
