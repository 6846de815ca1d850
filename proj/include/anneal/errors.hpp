#pragma once

#include <stdexcept>
#include <string>

namespace anneal {

// Caller passed arguments outside an operation's preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization or evaluation broke down (non-PD matrix, all weights -inf, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A closed form is undefined for the given inputs (e.g. a power integral diverges).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed experiment/model/schedule description.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace anneal
