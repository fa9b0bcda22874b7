#pragma once

#include <stdexcept>
#include <string>

namespace hrcplan {

enum class ErrorKind {
  parse,
  validation,
  not_found,
  protocol_violation,
  runtime,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the engine.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// The caller issued an event the current episode cannot accept
/// (non-feasible node, out-of-order action, suppressed arc, ...).
class ProtocolViolation : public Error {
public:
  explicit ProtocolViolation(const std::string& what) : Error(ErrorKind::protocol_violation, what) {}
};

class NotFound : public Error {
public:
  explicit NotFound(const std::string& what) : Error(ErrorKind::not_found, what) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, int line = 0)
      : Error(ErrorKind::parse, line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

}  // namespace hrcplan
