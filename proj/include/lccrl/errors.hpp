// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lccrl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside an operation's domain (empty sequence, bad rate, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Index outside a table or label range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a usage contract (non-scalar loss, nondeterministic check...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: malformed corpus lines, label mismatches, bad flags.
/// The CLI maps this family to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (word vectors, checkpoints, specs).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Pre-trained parameters cannot be transferred into a model.
class TransferError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace lccrl
