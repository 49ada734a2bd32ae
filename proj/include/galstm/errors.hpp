#pragma once

#include <stdexcept>
#include <string>

namespace galstm {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in a computation. `where()` names the offending stage.
class NumericError : public Error {
 public:
  explicit NumericError(std::string where)
      : Error("non-finite value in " + where), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// Row-level parse failure; `line()` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateDateError : public ParseError {
 public:
  using ParseError::ParseError;
};

class EmptySeriesError : public Error {
 public:
  using Error::Error;
};

class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class DivergedError : public Error {
 public:
  DivergedError(int epoch, const std::string& detail)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + detail),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace galstm
