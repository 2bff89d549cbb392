#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace featspace {

enum class ErrorCode {
  InvalidArgument,
  ZeroVector,
  CollinearPlaneUndefined,
  PlaneMismatch,
  DegenerateHead,
  BoundaryTie,
  TooFewClasses,
  SingleClass,
  DegenerateCentroid,
  ClassTooSmall,
  ClassMismatch,
  ZeroDenominator,
  DegenerateVariance,
  KTooLarge,
  EvenK,
  InsufficientInstances,
  EmptyBatch,
  BadSpec,
  DivergenceDetected,
  TooSmall,
  AlignmentMismatch,
  ParseError,
  DimensionMismatch,
  UnknownLabel,
  DuplicateClassName,
  DigestMismatch,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library surfaces as this exception. The code lets
/// callers (the CLI in particular) distinguish validation errors from I/O.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failures carry the 1-based line and column of the offending token.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(ErrorCode::ParseError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace featspace
