#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "ipfit/errors.hpp"

// CSV primitives. Numbers are written with the shortest round-trip decimal
// representation so files are byte-stable across runs and platforms.

namespace ipfit::csv {

inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Strict full-string parse; throws std::invalid_argument on trailing junk.
inline double parse_double(const std::string& s, const std::string& context) {
  double out = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
    --last;
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last || first == last)
    throw std::invalid_argument(context + ": cannot parse number from '" + s + "'");
  return out;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // raw cells, caller parses
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open '" + path + "' for reading");
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    for (auto& c : cells) c = trim(c);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw FileError("'" + path + "' is empty");
  return t;
}

inline void write_table(const std::string& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j)
      out << (j ? "," : "") << row[j];
    out << '\n';
  }
  if (!out) throw FileError("write to '" + path + "' failed");
}

}  // namespace ipfit::csv
