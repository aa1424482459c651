#pragma once

#include <stdexcept>
#include <string>

namespace cuenet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation parameter is out of its valid range (stride, kernel extent, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A model configuration is invalid or does not match the data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file or stream does not follow its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A region lies outside the tensor it indexes.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An attention operator received zero tokens.
class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cuenet
