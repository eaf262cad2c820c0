#pragma once

#include <stdexcept>
#include <string>

namespace cotlab {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value outside an operation's stated domain (probabilities, lengths, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A configuration object violating its own invariants.
class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace cotlab
