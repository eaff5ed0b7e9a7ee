#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ftrv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (graph file, strategy file, objective string, config).
/// Line and column are 1-based; zero means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0 && column == 0) return what;
    std::string out = what + " (";
    if (line != 0) out += "line " + std::to_string(line);
    if (column != 0) {
      if (line != 0) out += ", ";
      out += "column " + std::to_string(column);
    }
    return out + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

/// Well-formed input that violates a semantic constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// No bottom SCC of the chain covers every atom of the objective.
/// `gaps` lists (atom label, BSCC index) pairs that could not be covered.
class UncoverableError : public Error {
 public:
  UncoverableError(const std::string& what, std::vector<std::pair<std::string, std::size_t>> gaps)
      : Error(what), gaps_(std::move(gaps)) {}

  const std::vector<std::pair<std::string, std::size_t>>& gaps() const noexcept { return gaps_; }

 private:
  std::vector<std::pair<std::string, std::size_t>> gaps_;
};

class ResourceLimitError : public Error {
 public:
  using Error::Error;
};

/// Linear solver failure or a non-finite intermediate value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ftrv
