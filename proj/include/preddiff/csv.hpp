#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "preddiff/core.hpp"

// RFC 4180 reading: header row required, quoted fields may contain commas,
// doubled quotes and line breaks; '.' is the only decimal separator.

namespace preddiff {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

/// Splits the whole stream into records of fields.
inline std::vector<std::vector<std::string>> csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;
  std::size_t line = 1;
  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  const auto end_record = [&] {
    end_field();
    // A blank line yields one empty field; skip it.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  char ch = 0;
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      end_field();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      end_record();
      ++line;
    } else if (ch == '\n') {
      end_record();
      ++line;
    } else if (ch == '"') {
      if (field_started || after_quote) {
        throw SchemaError("CSV line " + std::to_string(line) +
                          ": stray quote inside an unquoted field");
      }
      quoted = true;
      field_started = true;
    } else {
      if (after_quote) {
        throw SchemaError("CSV line " + std::to_string(line) +
                          ": text after a closing quote");
      }
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) throw SchemaError("CSV ends inside a quoted field");
  if (field_started || after_quote || !record.empty()) end_record();
  return records;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

[[nodiscard]] inline CsvTable read_csv(std::istream& in) {
  auto records = detail::csv_records(in);
  if (records.empty()) throw SchemaError("CSV input has no header row");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw SchemaError("CSV record " + std::to_string(r) + " has " +
                        std::to_string(records[r].size()) + " fields, header has " +
                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

[[nodiscard]] inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open CSV file: " + path);
  return read_csv(in);
}

/// Parses one numeric field; empty or non-finite values are load errors.
[[nodiscard]] inline double parse_number(std::string_view text, std::size_t record,
                                         std::string_view column) {
  const std::string_view t = detail::trim(text);
  const auto where = [&] {
    return "record " + std::to_string(record) + ", column '" + std::string(column) + "'";
  };
  if (t.empty()) throw SchemaError("missing value at " + where());
  double value = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw SchemaError("not a number at " + where() + ": '" + std::string(t) + "'");
  }
  if (!std::isfinite(value)) throw SchemaError("non-finite value at " + where());
  return value;
}

[[nodiscard]] inline Dataset to_dataset(const CsvTable& table) {
  RowMatrix values(static_cast<Eigen::Index>(table.rows.size()),
                   static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_number(table.rows[r][c], r + 1, table.header[c]);
    }
  }
  return Dataset(std::move(values), table.header);
}

[[nodiscard]] inline Dataset read_dataset(std::istream& in) { return to_dataset(read_csv(in)); }

[[nodiscard]] inline Dataset read_dataset_text(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in);
}

[[nodiscard]] inline Dataset load_dataset(const std::string& path) {
  return to_dataset(read_csv_file(path));
}

/// Quotes a field when it contains a separator, quote or line break.
[[nodiscard]] inline std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace preddiff
