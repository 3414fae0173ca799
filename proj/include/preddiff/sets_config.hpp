#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "preddiff/core.hpp"
#include "preddiff/csv.hpp"

// Feature-set definitions, one per line:
//
//   # comment
//   pixel_block = [0, 1, 4..7]
//   income      = ["salary", "bonus"]
//
// Entries are column indices, quoted column names, or inclusive index ranges.

namespace preddiff {

struct NamedSet {
  std::string name;
  FeatureSet set;
};

namespace detail {

class SetsParser {
 public:
  SetsParser(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

  NamedSet parse(const std::vector<std::string>& columns) {
    NamedSet out;
    out.name = identifier();
    skip_space();
    expect('=');
    skip_space();
    expect('[');
    std::vector<std::size_t> indices;
    skip_space();
    if (peek() != ']') {
      for (;;) {
        skip_space();
        entry(columns, indices);
        skip_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect(']');
    skip_space();
    if (pos_ != s_.size()) fail("unexpected trailing text");
    if (indices.empty()) fail("set '" + out.name + "' is empty");
    std::sort(indices.begin(), indices.end());
    if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
      fail("set '" + out.name + "' lists a column twice");
    }
    out.set = FeatureSet(std::move(indices));
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaError("sets file line " + std::to_string(line_) + ": " + what);
  }

  [[nodiscard]] char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string identifier() {
    skip_space();
    if (peek() == '"') return quoted();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                s_[pos_] == '_' || s_[pos_] == '-' || s_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a set name");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string quoted() {
    expect('"');
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out.push_back(s_[pos_++]);
    }
    expect('"');
    return out;
  }

  std::size_t number() {
    std::size_t value = 0;
    const char* first = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), value);
    if (ec != std::errc{} || ptr == first) fail("expected a column index");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  void check_index(std::size_t index, const std::vector<std::string>& columns) const {
    if (index >= columns.size()) {
      fail("column index " + std::to_string(index) + " out of range for " +
           std::to_string(columns.size()) + " columns");
    }
  }

  void entry(const std::vector<std::string>& columns, std::vector<std::size_t>& out) {
    if (peek() == '"') {
      const std::string name = quoted();
      const auto it = std::find(columns.begin(), columns.end(), name);
      if (it == columns.end()) fail("unknown column: " + name);
      out.push_back(static_cast<std::size_t>(it - columns.begin()));
      return;
    }
    const std::size_t first = number();
    if (s_.substr(pos_, 2) == "..") {
      pos_ += 2;
      const std::size_t last = number();
      if (last < first) fail("range end precedes its start");
      check_index(last, columns);
      for (std::size_t i = first; i <= last; ++i) out.push_back(i);
      return;
    }
    check_index(first, columns);
    out.push_back(first);
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses set definitions against the given column names.
[[nodiscard]] inline std::vector<NamedSet> parse_sets(std::istream& in,
                                                      const std::vector<std::string>& columns) {
  std::vector<NamedSet> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view(line);
    // Comments run to the end of the line unless inside a quoted name.
    bool in_quote = false;
    for (std::size_t i = 0; i < view.size(); ++i) {
      if (view[i] == '"') in_quote = !in_quote;
      if (view[i] == '#' && !in_quote) {
        view = view.substr(0, i);
        break;
      }
    }
    view = detail::trim(view);
    if (view.empty()) continue;
    NamedSet parsed = detail::SetsParser(view, line_no).parse(columns);
    for (const auto& existing : sets) {
      if (existing.name == parsed.name) {
        throw SchemaError("sets file line " + std::to_string(line_no) +
                          ": duplicate set name '" + parsed.name + "'");
      }
    }
    sets.push_back(std::move(parsed));
  }
  if (sets.empty()) throw SchemaError("sets file defines no feature sets");
  return sets;
}

[[nodiscard]] inline std::vector<NamedSet> parse_sets_text(
    const std::string& text, const std::vector<std::string>& columns) {
  std::istringstream in(text);
  return parse_sets(in, columns);
}

[[nodiscard]] inline std::vector<NamedSet> load_sets(const std::string& path,
                                                     const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open sets file: " + path);
  return parse_sets(in, columns);
}

/// One singleton set per column, named after the column.
[[nodiscard]] inline std::vector<NamedSet> singleton_sets(const std::vector<std::string>& columns) {
  std::vector<NamedSet> sets;
  for (std::size_t c = 0; c < columns.size(); ++c) sets.push_back({columns[c], FeatureSet{c}});
  return sets;
}

}  // namespace preddiff
