#pragma once

#include <stdexcept>
#include <string>

namespace y00 {

/// Structurally invalid configuration: bad register specs, mismatched
/// lengths, unsupported moduli.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside an operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The operation declined to run because the request is past a tractability
/// guard. Callers distinguish this from failures (the CLI exits with 2).
class Refusal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace y00
