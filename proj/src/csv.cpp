#include "falmkit/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "falmkit/error.hpp"

namespace falmkit {

CsvTable::CsvTable(std::string source, std::vector<std::string> header, std::vector<CsvRow> rows)
    : source_(std::move(source)), header_(std::move(header)), rows_(std::move(rows)) {}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  if (auto idx = find_column(name)) return *idx;
  throw SchemaError(source_, 1, std::string(name), "required column missing from header");
}

namespace {

// Reads one logical record. Returns false at end of input.
bool next_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line,
                 const std::string& source) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  const std::size_t start_line = line;
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
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) {
        throw SchemaError(source, start_line, "", "quote inside unquoted field");
      }
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') continue;
      field.push_back(c);
    } else if (c == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else {
      if (field_was_quoted) throw SchemaError(source, start_line, "", "text after closing quote");
      field.push_back(c);
    }
  }
  if (quoted) throw SchemaError(source, start_line, "", "unterminated quoted field");
  ++line;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  std::size_t line = 1;
  std::vector<std::string> header;
  if (!next_record(in, header, line, source)) {
    throw SchemaError(source, 0, "", "file is empty (header row required)");
  }
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  for (auto& h : header) h = trim(h);

  std::vector<CsvRow> rows;
  std::vector<std::string> fields;
  for (;;) {
    const std::size_t start = line;
    if (!next_record(in, fields, line, source)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      throw SchemaError(source, start, "",
                        "expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    rows.push_back({start, fields});
  }
  return CsvTable(source, std::move(header), std::move(rows));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string(), 0, "", "cannot open file");
  return parse_csv(in, path.string());
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

std::string format_fixed(double value, int decimals) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  // Avoid "-0.000000" so equal values always serialise identically.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::optional<double> parse_real(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(std::string_view text) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace falmkit
