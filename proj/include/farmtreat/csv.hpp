#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "farmtreat/types.hpp"

namespace farmtreat {

// RFC-4180 CSV: quoted fields may contain commas, quotes ("" escape) and
// newlines; rows end at CR, LF or CRLF outside quotes.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  int ci;
  while ((ci = in.get()) != EOF) {
    const char c = static_cast<char>(ci);
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw ValidationError("CSV: quote inside unquoted field");
        quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get();
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
    }
  }
  if (quoted) throw ValidationError("CSV: unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  if (!any) throw ValidationError("CSV: empty input");
  return rows;
}

inline std::vector<std::vector<std::string>> read_csv_file(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  return read_csv(in);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

inline void write_csv_row(std::ostream& out,
                          const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(row[i]);
  }
  out << '\n';
}

// Round-trip-exact double formatting (%.17g).
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size())
      throw ValidationError("trailing characters in number: '" + s + "'");
    return v;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + s + "'");
  }
}

}  // namespace farmtreat
