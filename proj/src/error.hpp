#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace segsca {

// Error taxonomy mirrors the process exit codes: validation/schema/io -> 1,
// numeric -> 2.
enum class ErrorCode { validation = 1, numeric = 2, io = 1 };

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(std::string msg)
      : Error(ErrorCode::validation, std::move(msg)) {}
};

// Input table lacks a required column or has an unusable header.
class SchemaError : public ValidationError {
public:
  explicit SchemaError(std::string msg) : ValidationError(std::move(msg)) {}
};

class IoError : public Error {
public:
  explicit IoError(std::string msg) : Error(ErrorCode::io, std::move(msg)) {}
};

class NumericError : public Error {
public:
  explicit NumericError(std::string msg)
      : Error(ErrorCode::numeric, std::move(msg)) {}
};

class RankDeficiencyError : public NumericError {
public:
  RankDeficiencyError(std::string msg, std::vector<std::string> columns)
      : NumericError(std::move(msg)), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
  std::vector<std::string> columns_;
};

// Area composition makes the requested index undefined (e.g. a single
// populated group, so pi*(1-pi) sums to zero).
class DegenerateCompositionError : public ValidationError {
public:
  explicit DegenerateCompositionError(std::string msg)
      : ValidationError(std::move(msg)) {}
};

} // namespace segsca
