// Copyright 2026 The skrig Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "skrig/errors.hpp"

namespace skrig::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses a finite double or throws naming `context`.
inline double parse_double(std::string_view text, const std::string& context) {
  text = trim(text);
  double value = 0.0;
  const auto* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ValidationError("non-numeric value '" + std::string(text) + "' in " + context);
  }
  return value;
}

inline long long parse_int(std::string_view text, const std::string& context) {
  text = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("non-integer value '" + std::string(text) + "' in " + context);
  }
  return value;
}

/// Shortest representation that parses back to the same double.
inline std::string format(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Reads non-empty lines; the first one is returned as the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

inline Table read(std::istream& in, const std::string& source) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (table.header.empty()) {
      table.header = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " columns, got " +
                            std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw ValidationError(source + ": empty file");
  return table;
}

}  // namespace skrig::csv
