#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tdb::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Position of a header field, or npos.
  std::size_t find(std::string_view name) const;
};

/// RFC 4180 style reader: comma delimiter, double-quote quoting, CRLF or LF.
/// Every row must have as many fields as the header.
Table parse(std::istream& in);
Table read(const std::filesystem::path& path);

/// Shortest representation that round-trips through strtod.
std::string format_double(double value);

/// Quotes a field when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

}  // namespace tdb::csv
