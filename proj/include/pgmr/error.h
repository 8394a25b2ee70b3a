#ifndef PGMR_ERROR_H_
#define PGMR_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgmr {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file or record does not match the expected schema. Carries the
// 1-based line number when the input is line-delimited (0 otherwise).
class FormatError : public Error {
 public:
  FormatError(const std::string &what, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Structural SPARQL error (e.g. unbalanced braces) at a byte offset.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string &what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Model output that cannot be read as an intermediate query.
class MalformedOutput : public Error {
 public:
  MalformedOutput(const std::string &what, std::size_t offset = 0)
      : Error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A URI referenced by a query has no record in the relevant memory.
class UnknownUri : public Error {
 public:
  explicit UnknownUri(const std::string &uri)
      : Error("no metadata for " + uri), uri_(uri) {}
  const std::string &uri() const { return uri_; }

 private:
  std::string uri_;
};

// Replay provider has no recorded output for a prompt.
class MissingFixture : public Error {
 public:
  explicit MissingFixture(const std::string &prompt_hash)
      : Error("no fixture for prompt hash " + prompt_hash),
        prompt_hash_(prompt_hash) {}
  const std::string &prompt_hash() const { return prompt_hash_; }

 private:
  std::string prompt_hash_;
};

// Network-level failure talking to an external service. Retriable.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgmr

#endif  // PGMR_ERROR_H_
