#pragma once

#include <stdexcept>
#include <string>

namespace ttop {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ArgumentError : Error {
  using Error::Error;
};

/// Value outside the domain of a transform (e.g. logit of 0).
struct DomainError : Error {
  using Error::Error;
};

/// Non-finite model evaluation; carries the offending flat index when known.
struct EvaluationError : Error {
  EvaluationError(const std::string& what, int idx = -1) : Error(what), index(idx) {}
  int index;
};

struct DiagnosticError : Error {
  using Error::Error;
};

}  // namespace ttop
