#include "agrisk/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "agrisk/error.hpp"

namespace agrisk {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::InsufficientYears: return "InsufficientYears";
    case Errc::AllCountriesRemoved: return "AllCountriesRemoved";
    case Errc::EmptyIntersection: return "EmptyIntersection";
    case Errc::MissingRegressor: return "MissingRegressor";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonPositiveVariance: return "NonPositiveVariance";
    case Errc::UnnormalizedWeights: return "UnnormalizedWeights";
    case Errc::AllWeightsZero: return "AllWeightsZero";
    case Errc::MismatchedData: return "MismatchedData";
    case Errc::MissingClimateForTarget: return "MissingClimateForTarget";
    case Errc::MissingLevel: return "MissingLevel";
    case Errc::HorizonExceedsTrajectory: return "HorizonExceedsTrajectory";
    case Errc::SingleClimateModel: return "SingleClimateModel";
    case Errc::ZeroBaseline: return "ZeroBaseline";
  }
  return "Unknown";
}

namespace csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(Errc::MalformedFile, fmt::format("missing column '{}'", name));
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw Error(Errc::MalformedFile, "unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

Table parse(std::istream& in, const std::string& source_name) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    try {
      fields = split_line(line);
    } catch (const Error&) {
      throw Error(Errc::MalformedFile, fmt::format("{}:{}: unterminated quoted field", source_name, line_no));
    }
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(Errc::MalformedFile, fmt::format("{}:{}: expected {} fields, found {}", source_name, line_no,
                                                   table.header.size(), fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(Errc::MalformedFile, fmt::format("{}: empty file", source_name));
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, fmt::format("cannot open '{}'", path.string()));
  return parse(in, path.string());
}

std::string format_double(double value) {
  if (std::isnan(value)) return {};
  return fmt::format("{}", value);
}

namespace {
std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}
}  // namespace

double parse_double(std::string_view text, const std::string& context) {
  const auto t = trim(text);
  if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(Errc::MalformedFile, fmt::format("{}: not a number: '{}'", context, text));
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& context) {
  const auto t = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(Errc::MalformedFile, fmt::format("{}: not an integer: '{}'", context, text));
  }
  return value;
}

std::string quote_if_needed(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Writer& Writer::field(std::string_view text) {
  if (!first_) out_ << ',';
  out_ << quote_if_needed(text);
  first_ = false;
  return *this;
}

Writer& Writer::field(double value) { return field(std::string_view(format_double(value))); }

Writer& Writer::field(long long value) { return field(std::string_view(std::to_string(value))); }

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

void Writer::row(const std::vector<std::string>& fields) {
  for (const auto& f : fields) field(std::string_view(f));
  end_row();
}

}  // namespace csv
}  // namespace agrisk
