#pragma once

// Small helpers for the CSV files the tools emit. Every file starts with a
// "#schema=<name>/<version>" line followed by the column header.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "slacksac/error.hpp"

namespace slacksac::io {

/// Shortest round-trip representation.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw NumericError("cannot format number");
  return std::string(buf, ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::string schema;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("column '" + name + "' not found (schema " + schema + ")");
  }

  std::vector<double> numbers(const std::string& name) const {
    const auto c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) {
      if (c >= r.size()) throw IoError("short CSV row");
      double v = 0.0;
      const auto& s = r[c];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size())
        throw IoError("column '" + name + "': not a number: '" + s + "'");
      out.push_back(v);
    }
    return out;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(f, line) || line.rfind("#schema=", 0) != 0)
    throw IoError("'" + path + "' does not start with a #schema line");
  t.schema = line.substr(8);
  if (!std::getline(f, line)) throw IoError("'" + path + "' has no header");
  t.header = split_csv_line(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_csv_line(line));
    if (t.rows.back().size() != t.header.size()) throw IoError("'" + path + "': ragged row");
  }
  return t;
}

}  // namespace slacksac::io
