#pragma once

#include <stdexcept>
#include <string>

namespace gendetect {

/// Caller supplied something outside an operation's contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The corpus log or an index container could not be read or written.
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted file exists but does not parse.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gendetect
