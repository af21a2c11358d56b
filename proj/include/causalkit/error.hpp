#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causalkit {

enum class Errc {
  // data
  FileNotFound,
  ParseError,
  DuplicateColumnName,
  EmptyFile,
  UnknownColumn,
  NonPositiveValue,
  LengthTooShort,
  OutOfRange,
  InsufficientLength,
  EmptyVariantGroup,
  ShiftTooLarge,
  LengthMismatch,
  LagTooLarge,
  ExplicitRangeExcludesSample,
  TooFewRows,
  WindowTooLong,
  // usage
  InvalidArgument,
  DimensionMismatch,
  AlreadyCentered,
  // numerical
  SolveFailure,
  DegenerateVariance,
  AllPointsIdentical,
  NotPositiveDefinite,
};

enum class ErrorCategory { Config, Data, Numerical };

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateColumnName: return "DuplicateColumnName";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::UnknownColumn: return "UnknownColumn";
    case Errc::NonPositiveValue: return "NonPositiveValue";
    case Errc::LengthTooShort: return "LengthTooShort";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InsufficientLength: return "InsufficientLength";
    case Errc::EmptyVariantGroup: return "EmptyVariantGroup";
    case Errc::ShiftTooLarge: return "ShiftTooLarge";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LagTooLarge: return "LagTooLarge";
    case Errc::ExplicitRangeExcludesSample: return "ExplicitRangeExcludesSample";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::WindowTooLong: return "WindowTooLong";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::AlreadyCentered: return "AlreadyCentered";
    case Errc::SolveFailure: return "SolveFailure";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::AllPointsIdentical: return "AllPointsIdentical";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
  }
  return "Unknown";
}

constexpr ErrorCategory errc_category(Errc c) {
  switch (c) {
    case Errc::InvalidArgument:
    case Errc::DimensionMismatch:
    case Errc::AlreadyCentered:
      return ErrorCategory::Config;
    case Errc::SolveFailure:
    case Errc::DegenerateVariance:
    case Errc::AllPointsIdentical:
    case Errc::NotPositiveDefinite:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

// Every failure raised by the library. `code()` identifies the contract
// violation; the message carries the offending row/column/value.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return errc_category(code_); }

 private:
  Errc code_;
};

// ParseError carries the offending location so callers can report it.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& cell)
      : Error(Errc::ParseError, "row " + std::to_string(row) + ", column '" + column +
                                    "': cannot parse '" + cell + "'"),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace causalkit
