#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latinv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something that violates a precondition (shape, range, index).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Requested data does not exist yet (empty buffer, empty sample set).
class Unavailable : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during training or an update.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failure while talking to a black-box oracle. `ordinal` is the 1-based
/// query number on that oracle's ledger (0 for handshake-time failures).
class OracleFailure : public Error {
 public:
  OracleFailure(const std::string& what, std::uint64_t ordinal)
      : Error(ordinal == 0 ? what + " (handshake)" : what + " (query #" + std::to_string(ordinal) + ")"),
        ordinal_(ordinal) {}
  std::uint64_t ordinal() const noexcept { return ordinal_; }

 private:
  std::uint64_t ordinal_;
};

class TransportError : public OracleFailure {
 public:
  using OracleFailure::OracleFailure;
};

class ProtocolError : public OracleFailure {
 public:
  using OracleFailure::OracleFailure;
};

}  // namespace latinv
