// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RESPKIT_ERRORS_HPP_
#define RESPKIT_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace respkit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A caller violated a documented precondition (shape, kind, range).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Empty or otherwise unusable input data.
class InvalidInputError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Time or index outside the valid span of a recording.
class RangeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Inconsistent or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that violates a protocol invariant (patient overlap, id mismatch).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Lookup of a name that is not registered.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// A score whose denominator population is empty.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Binary container that cannot be decoded.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace respkit

#endif  // RESPKIT_ERRORS_HPP_
