#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hfmdp {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An assignment or table was asked to live on a scope it is not part of.
class ScopeError : public Error {
 public:
  using Error::Error;
};

/// Malformed tree or hierarchy: cycles, dangling parents, duplicate names.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data with the wrong shape or out-of-range values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The equivalent flat MDP is undefined (zero separator marginal).
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// Simplex failure: iteration cap, malformed LP, or an LP that should
/// never be infeasible turned out to be.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// An exact oracle refused an instance larger than its configured cap.
class OracleCapError : public Error {
 public:
  using Error::Error;
};

/// Model file syntax or semantic error, with a 1-based source location.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace hfmdp
