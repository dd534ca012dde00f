#pragma once

#include <stdexcept>
#include <string>

namespace msgc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A precondition on how an API is called was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, tables, graphs).
class DataError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateGraphError : public DataError {
 public:
  using DataError::DataError;
};

class DatasetTooSmallError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration or command-line usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace msgc
