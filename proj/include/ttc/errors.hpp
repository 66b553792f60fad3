#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ttc {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, unresolvable tokenizer, invalid policy.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input that violates a documented precondition (empty vote, length mismatch, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed JSONL / record / grader reply.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a generation backend. `retriable()` marks transport
/// failures that the retry loop may attempt again.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retriable)
      : Error(what), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

/// The request would not fit the backend context window.
class ContextLimitError : public BackendError {
 public:
  ContextLimitError(const std::string& what, std::size_t tokens_so_far)
      : BackendError(what, false), tokens_so_far_(tokens_so_far) {}
  std::size_t tokens_so_far() const noexcept { return tokens_so_far_; }

 private:
  std::size_t tokens_so_far_;
};

/// Curation pipeline failures (pool too small, stage order, ...).
class CurationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ttc
