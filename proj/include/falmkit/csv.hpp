#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace falmkit {

/// One parsed record together with the physical line it started on (header is line 1).
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// RFC-4180 table with a mandatory header row.
class CsvTable {
 public:
  CsvTable() = default;
  CsvTable(std::string source, std::vector<std::string> header, std::vector<CsvRow> rows);

  [[nodiscard]] const std::string& source() const noexcept { return source_; }
  [[nodiscard]] const std::vector<std::string>& header() const noexcept { return header_; }
  [[nodiscard]] const std::vector<CsvRow>& rows() const noexcept { return rows_; }

  [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws SchemaError when the column is absent.
  [[nodiscard]] std::size_t column(std::string_view name) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<CsvRow> rows_;
};

/// Parses UTF-8 CSV (quoted fields, doubled quotes, CRLF, embedded newlines).
/// Rows whose field count differs from the header raise SchemaError with the line number.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Fixed-point formatting in the C locale; NaN renders as "NA".
std::string format_fixed(double value, int decimals);

/// Strict parsers used by every ingest path. They return nullopt instead of throwing.
std::optional<double> parse_real(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

std::string trim(std::string_view text);

}  // namespace falmkit
