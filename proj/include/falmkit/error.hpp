#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace falmkit {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInputDomain,     // argument outside its mathematical domain
  kEmptyInput,      // an operation needed at least one element
  kDegenerate,      // data is valid but carries no information (constant, all tied, ...)
  kSchema,          // malformed or referentially broken study data
  kSurveyMapping,   // FST response text not in the option list
  kSingularDesign,  // rank-deficient regression design
  kNesting,         // models compared by an F-test are not nested
  kConfig,          // bad configuration value
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised for study-data problems; carries the offending file/line/field.
class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::size_t line, std::string field, const std::string& message)
      : Error(ErrorKind::kSchema, format(file, line, field, message)),
        file_(std::move(file)),
        line_(line),
        field_(std::move(field)) {}

  [[nodiscard]] const std::string& file() const noexcept { return file_; }
  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& field,
                            const std::string& message) {
    std::string out = file.empty() ? std::string("<input>") : file;
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += " [" + field + "]";
    return out + ": " + message;
  }

  std::string file_;
  std::size_t line_;
  std::string field_;
};

}  // namespace falmkit
