// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gprompt {

// Every failure raised by the library derives from Error so callers can catch
// one type; the subclasses map one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Bad magic, unsupported version, trailing garbage.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally readable data that violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class EmptyNeighborhood : public Error {
 public:
  using Error::Error;
};

}  // namespace gprompt
