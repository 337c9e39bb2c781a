#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlgm {

// Base for every data/validation failure raised by the library. The CLI maps
// these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input. `row` is 1-based with the CSV header as row 1 (JSON: array
// index + 1, reported as "record"); 0 when the failure is not tied to a row.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, const char* unit = "row")
      : Error(row ? unit + (" " + std::to_string(row)) + ": " + what : what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Precondition or domain violation (sizes, ranges, mismatched sets).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A quantity is undefined for this data, e.g. correlation with a constant
// series. Never reported as NaN.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlgm
