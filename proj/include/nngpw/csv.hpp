#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nngpw/errors.hpp"

namespace nngpw {

/// RFC 4180 field: quoted only when it contains a comma, quote or line break.
inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv_record(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << "\r\n";
}

/// Lines starting with '#' outside a quoted field are comments (used for
/// the truncation marker).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool at_record_start = true;
  bool any = false;
  auto finish_record = [&]() {
    record.push_back(field);
    field.clear();
    if (table.header.empty()) {
      table.header = record;
    } else {
      require(record.size() == table.header.size(), "malformed CSV: row has " + std::to_string(record.size()) +
                                                       " fields, header has " + std::to_string(table.header.size()));
      table.rows.push_back(record);
    }
    record.clear();
    at_record_start = true;
    any = false;
  };
  char c;
  while (in.get(c)) {
    if (at_record_start && !quoted && c == '#') {
      std::string comment;
      std::getline(in, comment);
      if (!comment.empty() && comment.back() == '\r') comment.pop_back();
      table.comments.push_back(comment);
      continue;
    }
    at_record_start = false;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      require(field.empty(), "malformed CSV: quote inside unquoted field");
      quoted = true;
    } else if (c == ',') {
      record.push_back(field);
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      finish_record();
    } else if (c == '\n') {
      finish_record();
    } else {
      field += c;
    }
  }
  require(!quoted, "malformed CSV: unterminated quoted field");
  if (any || !record.empty() || !field.empty()) finish_record();
  require(!table.header.empty(), "malformed CSV: missing header");
  return table;
}

}  // namespace nngpw
