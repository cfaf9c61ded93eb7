#pragma once

#include <stdexcept>
#include <string>

namespace zsiis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or channel-count contract violated.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Scalar argument outside its allowed range.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed checkpoint, report or image file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or undersized dataset.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration; `key` names the offending entry when known.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::string key = {})
      : Error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace zsiis
