#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace harfuse {

enum class ErrorCode {
  contract,
  insufficient_samples,
  not_positive_definite,
  io,
  parse,
  schema,
  too_short,
  provenance,
  empty_dataset,
  degenerate_labels,
  divergence,
  deserialization,
  alignment,
  config,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(std::size_t pivot, double value);
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& why);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TooShortError : public Error {
 public:
  TooShortError(std::size_t actual, std::size_t required);
  std::size_t actual_length() const noexcept { return actual_; }

 private:
  std::size_t actual_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what);
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

// Process exit code for the CLI: 2 config, 3 data, 4 numeric divergence, 1 otherwise.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace harfuse
