// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace topp {

/// Base for every error raised by the library. Callers that only care about
/// "something in topp failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or lengths that do not line up (q vs K columns, K vs V rows, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented domain (p outside [0,1], B > n, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Renormalizing over a selection that carries no attention mass.
class DegenerateSelectionError : public Error {
 public:
  using Error::Error;
};

/// A configuration document that failed to parse or validate.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace topp
