// Exception types shared by every qref module.
//
// The CLI maps these onto exit codes, so each failure category gets its own
// type rather than a message convention.
#pragma once

#include <stdexcept>
#include <string>

namespace qref {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (dimension mismatch, wrong coordinate count).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain (non-normalizable width, singular map).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A superposition whose Gram norm vanishes.
class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

/// A valid request the library does not implement (e.g. exact mode for N > 3).
class UnsupportedCaseError : public Error {
 public:
  using Error::Error;
};

/// A sampling grid too coarse or too narrow for the operator being rendered.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Malformed user configuration (CLI layer).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qref
