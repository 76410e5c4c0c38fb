#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace athena {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Carries the offending line (0 when not file-backed) and field name.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t line, std::string field, const std::string& what)
      : Error((line ? "line " + std::to_string(line) + ": " : std::string{}) + field + ": " + what),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Malformed binary model bundle.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (achieved residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class EmptyMatrixError : public Error {
 public:
  using Error::Error;
};

class UnknownUserError : public Error {
 public:
  explicit UnknownUserError(const std::string& id) : Error("unknown user: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class UnknownItemError : public Error {
 public:
  explicit UnknownItemError(const std::string& id) : Error("unknown item: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class FractionError : public Error {
 public:
  using Error::Error;
};

}  // namespace athena
