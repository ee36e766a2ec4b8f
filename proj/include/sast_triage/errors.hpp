#pragma once

#include <stdexcept>
#include <string>

namespace sast_triage {

/// Malformed input document. line/column are 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& message, int line = 0, int column = 0)
      : std::runtime_error(format(message, line, column)), line_(line), column_(column) {}

  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] int column() const { return column_; }

 private:
  static std::string format(const std::string& message, int line, int column) {
    if (line == 0) return message;
    std::string where = "line " + std::to_string(line);
    if (column != 0) where += ", column " + std::to_string(column);
    return message + " (" + where + ")";
  }

  int line_;
  int column_;
};

/// A JSON record that does not match the canonical schema.
class SchemaError : public ParseError {
 public:
  SchemaError(const std::string& field, const std::string& problem, int line = 0)
      : ParseError("field \"" + field + "\": " + problem, line), field_(field) {}

  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PathTraversalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network failure, or retries exhausted on a retryable status.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The provider rejected the request (auth, shape); retrying cannot help.
class NonRetryableError : public TransportError {
 public:
  NonRetryableError(const std::string& message, int status) : TransportError(message), status_(status) {}
  [[nodiscard]] int status() const { return status_; }

 private:
  int status_;
};

/// Reply arrived but carried no usable completion.
class ProtocolError : public TransportError {
 public:
  using TransportError::TransportError;
};

class CacheMissError : public std::runtime_error {
 public:
  CacheMissError(const std::string& key, const std::string& finding_id)
      : std::runtime_error("replay cache miss for key " + key + " (finding " +
                           (finding_id.empty() ? std::string("<unknown>") : finding_id) + ")"),
        key_(key),
        finding_id_(finding_id) {}

  [[nodiscard]] const std::string& key() const { return key_; }
  [[nodiscard]] const std::string& finding_id() const { return finding_id_; }

 private:
  std::string key_;
  std::string finding_id_;
};

/// Rendering refused; code is "unassessable" or "prompt-too-large".
class PromptError : public std::runtime_error {
 public:
  PromptError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sast_triage
