#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace agrisk::csv {

/// A parsed CSV file: the header row plus every data row, all as raw text.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Column position for a header name; throws MalformedFile when absent.
  std::size_t column(std::string_view name) const;
};

/// Reads a UTF-8 CSV with a header row. Double-quoted fields may contain
/// commas and doubled quotes. Blank lines are skipped.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source_name);

std::vector<std::string> split_line(std::string_view line);

/// Shortest text that parses back to the same double; NaN renders as an empty field.
std::string format_double(double value);

/// Parses a number; an empty (or whitespace-only) field yields NaN.
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

std::string quote_if_needed(std::string_view field);

/// Small row writer that quotes fields containing separators.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  Writer& field(std::string_view text);
  Writer& field(double value);
  Writer& field(long long value);
  Writer& field(int value) { return field(static_cast<long long>(value)); }
  Writer& field(std::size_t value) { return field(static_cast<long long>(value)); }
  void end_row();
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace agrisk::csv
