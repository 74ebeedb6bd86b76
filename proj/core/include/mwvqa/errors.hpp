// Copyright 2026 The mwvqa Authors
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

#ifndef MWVQA_ERRORS_HPP_
#define MWVQA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mwvqa {

// Root of every exception the library throws. The CLI maps the two
// intermediate families onto its exit codes: ValidationError -> 2,
// IoError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Shape disagreement between operands.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A documented precondition of an operation does not hold.
class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Index outside its valid range (token id, code id, answer id).
class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DatasetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PatchSizeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed file contents (PPM header, tensor magic, taxonomy edges).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class CheckpointVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CheckpointTruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CheckpointShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace mwvqa

#endif  // MWVQA_ERRORS_HPP_
