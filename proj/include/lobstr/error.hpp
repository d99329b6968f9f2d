// Copyright 2026 The lobstr Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace lobstr {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input text or binary payload (BVH, JSON, recordings, checkpoints).
struct ParseError : Error {
  using Error::Error;
};

/// Structurally valid input that violates a contract (shape mismatch, missing
/// joint, empty dataset, unsupported version).
struct DataError : Error {
  using Error::Error;
};

/// Numeric failure: NaN/Inf where finite values are required, degenerate
/// geometry, non-finite loss.
struct NumericError : Error {
  using Error::Error;
};

// CLI exit codes. 0 is success, 2 is a usage error (bad flags).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

}  // namespace lobstr
