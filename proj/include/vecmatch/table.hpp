#pragma once

#include <string>
#include <vector>

namespace vecmatch {

/// Minimal column-oriented table for TSV/CSV metric files. All cells are
/// stored as strings; numeric formatting goes through format_double so
/// outputs round-trip exactly and are byte-stable across runs.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;  // each row has columns.size() cells

  void add_row(std::vector<std::string> cells);
  std::size_t col_index(const std::string& name) const;  // throws if absent
};

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double x);

/// Parse a double, rejecting trailing junk. Throws ValidationError with
/// the offending text on failure.
double parse_double(const std::string& text);

void write_tsv(const Table& t, const std::string& path);
Table read_tsv(const std::string& path);

/// Delimiter-splitting helper shared by the TSV and CSV readers.
std::vector<std::string> split(const std::string& line, char delim);

}  // namespace vecmatch
