#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qdeform {

enum class ErrorKind {
  dimension,
  generator,
  parameter,
  no_solution,
  overflow,
  inversion,
  pole,
  branch_degenerate,
  integrator,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::generator: return "generator";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::no_solution: return "no_solution";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::inversion: return "inversion";
    case ErrorKind::pole: return "pole";
    case ErrorKind::branch_degenerate: return "branch_degenerate";
    case ErrorKind::integrator: return "integrator";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Base of every error the library throws. The kind is what callers branch on;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the similarity recurrence when an entry stops being finite.
/// (row, col) is the first offending matrix index in row-major order.
class OverflowError : public Error {
 public:
  OverflowError(std::size_t row, std::size_t col)
      : Error(ErrorKind::overflow,
              "similarity recurrence overflow at S(" + std::to_string(row) + "," +
                  std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class InversionError : public Error {
 public:
  InversionError(double condition, double residual)
      : Error(ErrorKind::inversion,
              "similarity operator numerically singular (condition estimate " +
                  std::to_string(condition) + ", inverse residual " + std::to_string(residual) +
                  ")"),
        condition_(condition),
        residual_(residual) {}

  double condition() const noexcept { return condition_; }
  double residual() const noexcept { return residual_; }

 private:
  double condition_;
  double residual_;
};

inline void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

}  // namespace qdeform
