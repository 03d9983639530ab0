// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sparsify {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or non-positive derived extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A weight distribution with zero spread where a positive sigma is required.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public IoError {
 public:
  using IoError::IoError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConfigSyntaxError : public ConfigError {
 public:
  ConfigSyntaxError(const std::string& what, std::size_t line,
                    std::size_t column)
      : ConfigError(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class UnknownKeyError : public ConfigError {
 public:
  explicit UnknownKeyError(const std::string& key)
      : ConfigError("unknown configuration key '" + key + "'"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class ValidationError : public ConfigError {
 public:
  ValidationError(const std::string& key, const std::string& what)
      : ConfigError(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace sparsify
