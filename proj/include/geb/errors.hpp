#pragma once

#include <stdexcept>
#include <string>

namespace geb {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A projection target set is empty (or a precondition guaranteeing
// non-emptiness does not hold).
class InfeasibleSet : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// Feeder is not a tree rooted at the feeder head.
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Scenario parsing / cross-reference / trace length problems. The message
// always carries the offending field path or file name.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IdentificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace geb
