#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/obj_io.hpp"

// Minimal comma-separated text helpers shared by the file formats.

namespace meshsal::csv {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct Table {
  std::string path;
  std::vector<std::string> header;
  std::vector<Row> rows;

  [[noreturn]] void fail(const Row& row, const std::string& what) const { throw ParseError(path, row.line, what); }

  double number(const Row& row, std::size_t col) const {
    auto v = detail::parse_double(row.fields.at(col));
    if (!v) fail(row, "malformed number '" + row.fields[col] + "' in column '" + header.at(col) + "'");
    return *v;
  }

  long long integer(const Row& row, std::size_t col) const {
    auto v = detail::parse_int(row.fields.at(col));
    if (!v) fail(row, "malformed integer '" + row.fields[col] + "' in column '" + header.at(col) + "'");
    return *v;
  }
};

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Reads a header line plus data rows; blank lines are skipped. Every row
/// must have as many fields as the header.
inline Table read(const std::string& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  Table table;
  table.path = path;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split(line);
    if (!have_header) {
      if (line_no == 1 && fields.size() > 0 && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      if (fields != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(path, line_no, "unexpected header, expected '" + want + "'");
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    table.rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw InputError(path + ": no samples (file is empty)");
  return table;
}

/// printf-style formatting into a std::string.
template <typename... Args>
std::string format(const char* fmt, Args... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string out(static_cast<std::size_t>(n) + 1, '\0');
  std::snprintf(out.data(), out.size(), fmt, args...);
  out.resize(static_cast<std::size_t>(n));
  return out;
}

/// Shortest formatting with nine significant digits.
inline std::string g9(double v) { return format("%.9g", v); }

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  out << content;
  if (!out) throw InputError("failed writing file: " + path);
}

}  // namespace meshsal::csv
