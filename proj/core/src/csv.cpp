#include "towerdebias/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "towerdebias/error.hpp"

namespace tdb::csv {

std::size_t Table::find(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::string::npos;
}

namespace {

// Reads one record. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields,
                 std::size_t line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;

  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) {
        fail(ErrorKind::MalformedInput,
             "unexpected quote inside unquoted field on line " +
                 std::to_string(line));
      }
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) {
    fail(ErrorKind::MalformedInput,
         "unterminated quoted field starting on line " + std::to_string(line));
  }
  fields.push_back(std::move(field));
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].empty();
}

}  // namespace

Table parse(std::istream& in) {
  Table table;
  std::vector<std::string> fields;
  std::size_t line = 1;
  if (!read_record(in, fields, line) || blank(fields)) {
    fail(ErrorKind::EmptyTable, "missing header row");
  }
  // strip a UTF-8 byte order mark
  if (fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
  table.header = fields;

  while (read_record(in, fields, ++line)) {
    if (blank(fields)) continue;
    if (fields.size() != table.header.size()) {
      fail(ErrorKind::MalformedInput,
           "line " + std::to_string(line) + " has " +
               std::to_string(fields.size()) + " fields, header has " +
               std::to_string(table.header.size()));
    }
    table.rows.push_back(fields);
  }
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::MissingFile, "cannot open " + path.string());
  }
  return parse(in);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) {
    fail(ErrorKind::Io, "cannot format floating-point value");
  }
  return std::string(buf, end);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace tdb::csv
