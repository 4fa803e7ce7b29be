// Copyright 2026 The pQRNN Authors.
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

#ifndef PQRNN_ERRORS_H_
#define PQRNN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace pqrnn {

// Base of every error thrown by the library. Subclasses map onto the CLI's
// documented exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable dataset input (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Teacher records do not line up with examples (exit code 4).
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Unreadable, corrupt or incompatible checkpoint (exit code 5).
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf reached a loss or a gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition (empty input, misuse of a tape).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace pqrnn

#endif  // PQRNN_ERRORS_H_
