#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsynth/core.hpp"

namespace crowdsynth::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line_no, std::string_view name) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": field '" + std::string(name) +
                         "' is not a number: '" + std::string(field) + "'",
                     line_no);
  }
  return v;
}

inline long long parse_int(std::string_view field, std::size_t line_no, std::string_view name) {
  field = trim(field);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": field '" + std::string(name) +
                         "' is not an integer: '" + std::string(field) + "'",
                     line_no);
  }
  return v;
}

/// Shortest round-trippable text for a double (at least 9 significant digits
/// are always preserved since %.17g is exact for binary64).
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Reads a CSV file with an exact header. Calls row(fields, line_no) for every
/// non-empty data line; blank lines are skipped.
template <typename RowFn>
void read_file(const std::string& path, std::string_view header, RowFn&& row) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  const std::size_t columns = split(header).size();
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (!seen_header) {
      if (t != header) {
        throw ParseError(path + ": line " + std::to_string(line_no) + ": expected header '" +
                             std::string(header) + "'",
                         line_no);
      }
      seen_header = true;
      continue;
    }
    auto fields = split(t);
    if (fields.size() != columns) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    row(fields, line_no);
  }
  if (!seen_header) throw ParseError(path + ": missing header '" + std::string(header) + "'", line_no);
}

}  // namespace crowdsynth::csv
