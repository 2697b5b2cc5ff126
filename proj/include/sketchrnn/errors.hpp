// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sketchrnn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, bad length).
class ContractError : public Error {
public:
  using Error::Error;
};

class InvalidInput : public Error {
public:
  using Error::Error;
};

class InvalidConfig : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based; 0 when not line oriented.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string &what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class CorruptFile : public Error {
public:
  using Error::Error;
};

class VersionMismatch : public Error {
public:
  using Error::Error;
};

class SessionError : public Error {
public:
  using Error::Error;
};

} // namespace sketchrnn
