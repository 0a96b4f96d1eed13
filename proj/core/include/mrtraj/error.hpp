#pragma once

#include <stdexcept>
#include <string>

namespace mrtraj {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (basis order, horizon, solver settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between coefficient sets, bases or systems.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Scenario generation failed after the retry budget was exhausted.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// API misuse (empty batches, mixed systems, bad argument combinations).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The KKT system could not be factorized.
class SetupError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrtraj
