// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace csilab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, configuration files, or violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Non-finite values, singular steps, indefinite matrices.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data (.lat files, keys, reports).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class TransportError : public IoError {
 public:
  using IoError::IoError;
};

// A remote response that arrived but could not be interpreted.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Caption lookup for a latent that the ledger has never seen.
class LookupError : public Error {
 public:
  using Error::Error;
};

}  // namespace csilab
