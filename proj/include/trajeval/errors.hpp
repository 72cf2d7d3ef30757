#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace trajeval {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset file could not be ingested.
class DatasetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The backend could not produce a response (network, HTTP status, unscripted mock call).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A response was received but its content is unusable. Consumes a retry attempt.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// No candidate structured substring in the model text.
class NoStructureFound : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Candidate substrings were found but none of them parsed.
class ParseFailed : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Parsed record does not satisfy the stage schema.
class SchemaViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RetriesExhausted : public Error {
 public:
  RetriesExhausted(int attempts, std::string last_text, std::vector<std::string> reasons);

  int attempts() const noexcept { return attempts_; }
  const std::string& last_text() const noexcept { return last_text_; }
  const std::vector<std::string>& reasons() const noexcept { return reasons_; }

 private:
  int attempts_;
  std::string last_text_;
  std::vector<std::string> reasons_;
};

}  // namespace trajeval
