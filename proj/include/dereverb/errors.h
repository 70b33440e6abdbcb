// include/dereverb/errors.h

// Copyright 2026 The dereverb Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DEREVERB_ERRORS_H_
#define DEREVERB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace dereverb {

// Violated precondition or contract of an operation. The CLI maps every
// subclass to exit code 1.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit together.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Argument outside the mathematical domain of a function (log of a
// non-positive value, inverted band edges, ...).
class DomainError : public ContractError {
 public:
  using ContractError::ContractError;
};

class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Non-finite values or a solve that cannot proceed.
class NumericError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Requested reverberation time cannot be realized in the given room.
class InfeasibleError : public ContractError {
 public:
  using ContractError::ContractError;
};

class GeometryError : public ContractError {
 public:
  using ContractError::ContractError;
};

class UnsupportedError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Missing or malformed files. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dereverb

#endif  // DEREVERB_ERRORS_H_
