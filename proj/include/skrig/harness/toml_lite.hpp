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

// Reads the TOML subset used by experiment configs into JSON: [table] and [a.b] headers,
// key = value pairs, strings, numbers, booleans and single-line arrays of those.

#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "skrig/csv.hpp"
#include "skrig/errors.hpp"

namespace skrig::toml {

namespace detail {

inline std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(csv::trim(line.substr(0, i)));
  }
  return std::string(csv::trim(line));
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::string where) : s_(text), where_(std::move(where)) {}

  nlohmann::json parse() {
    auto v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ValidationError(where_ + ": " + what); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  nlohmann::json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

  nlohmann::json string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json array() {
    ++pos_;
    nlohmann::json out = nlohmann::json::array();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      if (s_[pos_] != ',') fail("expected ',' in array");
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return out;
      }
    }
  }

  nlohmann::json number() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' && s_[end] != '\t') ++end;
    std::string token(s_.substr(pos_, end - pos_));
    std::erase(token, '_');
    pos_ = end;
    const bool integral = token.find_first_of(".eE") == std::string::npos;
    if (integral) {
      long long v = 0;
      const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec == std::errc() && p == token.data() + token.size()) return v;
    }
    return csv::parse_double(token, where_);
  }

  std::string_view s_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline nlohmann::json parse(std::istream& in, const std::string& source = "config.toml") {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto line = detail::strip_comment(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ValidationError(where + ": malformed table header");
      table = &root;
      std::stringstream path(line.substr(1, line.size() - 2));
      std::string part;
      while (std::getline(path, part, '.')) {
        const std::string key(csv::trim(part));
        if (key.empty()) throw ValidationError(where + ": empty table name");
        auto& next = (*table)[key];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object()) throw ValidationError(where + ": '" + key + "' is not a table");
        table = &next;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    std::string key(csv::trim(std::string_view(line).substr(0, eq)));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) throw ValidationError(where + ": empty key");
    if (table->contains(key)) throw ValidationError(where + ": duplicate key '" + key + "'");
    (*table)[key] = detail::ValueParser(std::string_view(line).substr(eq + 1), where).parse();
  }
  return root;
}

inline nlohmann::json parse(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

}  // namespace skrig::toml
