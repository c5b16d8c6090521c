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

#include "revknn/error.h"

#include <iostream>
#include <mutex>
#include <utility>

namespace revknn {
namespace {

std::mutex& handler_mutex() {
  static std::mutex mu;
  return mu;
}

WarningHandler& handler() {
  static WarningHandler h = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return h;
}

}  // namespace

std::string_view to_string(DataErrorKind kind) {
  switch (kind) {
    case DataErrorKind::kMissingFile: return "missing file";
    case DataErrorKind::kBadMagic: return "bad magic";
    case DataErrorKind::kVersionMismatch: return "version mismatch";
    case DataErrorKind::kTruncated: return "truncated file";
    case DataErrorKind::kInconsistentDimensions: return "inconsistent dimensions";
    case DataErrorKind::kCorruption: return "corruption";
    case DataErrorKind::kFormat: return "malformed file";
  }
  return "data error";
}

DataError::DataError(DataErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      detail_(detail) {}

WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard<std::mutex> lock(handler_mutex());
  return std::exchange(handler(), std::move(h));
}

void warn(std::string_view message) {
  std::lock_guard<std::mutex> lock(handler_mutex());
  if (handler()) handler()(message);
}

}  // namespace revknn
