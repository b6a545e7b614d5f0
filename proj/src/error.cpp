#include "phocap/error.hpp"

namespace phocap {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Range: return "range error";
    case ErrorKind::PhysicalConsistency: return "physical-consistency error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::FitFailure: return "fit failure";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Parameter:
      return 2;
    case ErrorKind::Data:
    case ErrorKind::Schema:
    case ErrorKind::Parse:
    case ErrorKind::Range:
    case ErrorKind::PhysicalConsistency:
      return 3;
    case ErrorKind::FitFailure:
      return 4;
    case ErrorKind::Io:
      return 1;
  }
  return 1;
}

}  // namespace phocap
