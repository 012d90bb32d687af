// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <stdexcept>
#include <string>

namespace wmattr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not conform to an operation's rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (records, labels, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wmattr
