#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgpath {

// Base for every error the library raises. Callers that only care about
// "something in kgpath failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& why)
      : Error("malformed record at line " + std::to_string(line) + ": " + why),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnknownEntity : public Error {
 public:
  explicit UnknownEntity(const std::string& what) : Error("unknown entity: " + what) {}
};

class UnknownRelation : public Error {
 public:
  explicit UnknownRelation(const std::string& what) : Error("unknown relation: " + what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

class NotNormalized : public Error {
 public:
  explicit NotNormalized(const std::string& what) : Error("distribution not normalized: " + what) {}
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("no usable training instances") {}
};

class EmptyBatch : public Error {
 public:
  EmptyBatch() : Error("empty batch") {}
};

class UnparsablePath : public Error {
 public:
  explicit UnparsablePath(const std::string& text)
      : Error("no relation found in path text: '" + text + "'") {}
};

class LMUnavailable : public Error {
 public:
  explicit LMUnavailable(const std::string& what) : Error("language model unavailable: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

}  // namespace kgpath
