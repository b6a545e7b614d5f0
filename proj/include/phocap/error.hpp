#pragma once

#include <stdexcept>
#include <string>

namespace phocap {

enum class ErrorKind {
  Range,               // value or band outside a grid
  PhysicalConsistency, // e.g. reflectance + transmittance > 1
  Parameter,           // caller-supplied parameter out of range
  Data,                // dataset content violates an invariant
  Schema,              // column/label layout mismatch
  Parse,               // malformed text input
  FitFailure,          // optimizer did not converge
  Validation,          // configuration rejected before compute
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for everything thrown by the library. The kind selects the
/// process exit code in the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// CLI exit code for an error kind: 2 validation, 3 data, 4 convergence, 1 other.
int exit_code(ErrorKind kind) noexcept;

}  // namespace phocap
