// Copyright 2026 The revknn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REVKNN_ERROR_H_
#define REVKNN_ERROR_H_

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace revknn {

// Raised when a caller breaks an operation's preconditions (shape mismatch,
// out-of-range token id, empty input, invalid hyper-parameter).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DataErrorKind {
  kMissingFile,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kInconsistentDimensions,
  kCorruption,
  kFormat,
};

// Short stable text for each kind; it prefixes DataError::what().
std::string_view to_string(DataErrorKind kind);

// Raised when persisted or cross-artifact data is unusable.
class DataError : public std::runtime_error {
 public:
  DataError(DataErrorKind kind, const std::string& detail);

  DataErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  DataErrorKind kind_;
  std::string detail_;
};

// Warning-level: an artifact was produced by a different model or config than
// the one it is being combined with. Only thrown when a caller asks for strict
// provenance checks; otherwise reported through warn().
class FingerprintMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ContractError(message) when cond is false.
inline void require(bool cond, std::string_view message) {
  if (!cond) throw ContractError(std::string(message));
}

using WarningHandler = std::function<void(std::string_view)>;

// Installs a process-wide warning sink and returns the previous one. The
// default sink writes "warning: <msg>" to stderr.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace revknn

#endif  // REVKNN_ERROR_H_
