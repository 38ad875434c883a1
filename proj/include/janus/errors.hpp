#pragma once

#include <stdexcept>
#include <string>

namespace janus {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched array shapes or empty inputs where data is required.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (rates, sizes, bounds, CLI input).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A requested error bound tighter than the hierarchy can provide.
class UnsatisfiableBoundError : public Error {
 public:
  using Error::Error;
};

/// A deadline too tight for even the zero-parity schedule.
class InfeasibleDeadlineError : public Error {
 public:
  using Error::Error;
};

/// Retransmission series fails to converge (loss probability reached 1).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Not enough fragments present to reconstruct a group.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// A transfer session was aborted before completion.
class TransferAbortedError : public Error {
 public:
  using Error::Error;
};

}  // namespace janus
