#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "cogmac/error.hpp"

namespace cogmac::detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> cells;
  std::size_t begin = 0;
  while (true) {
    const auto comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(begin));
      break;
    }
    cells.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
  return cells;
}

inline std::string cell_context(std::size_t row, std::string_view column) {
  return "row " + std::to_string(row) + ", column '" + std::string(column) + "'";
}

inline double parse_real(std::string_view cell, std::size_t row, std::string_view column) {
  std::string s(cell);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw SchemaError("bad real '" + s + "' at " + cell_context(row, column));
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view cell, std::size_t row, std::string_view column) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw SchemaError("bad integer '" + std::string(cell) + "' at " + cell_context(row, column));
  }
  return v;
}

/// Reads the header row and checks it matches `expected` exactly.
inline void expect_header(std::istream& in, std::string_view expected, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(std::string(what) + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) {
    throw SchemaError(std::string(what) + ": expected header '" + std::string(expected) + "', got '" +
                      line + "'");
  }
}

}  // namespace cogmac::detail
