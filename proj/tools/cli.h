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

#ifndef REVKNN_TOOLS_CLI_H_
#define REVKNN_TOOLS_CLI_H_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace revknn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// args excludes the program name.
int run_command(const std::vector<std::string>& args);

struct ExperimentReport {
  nlohmann::json json;
  std::string text;
};

// Rebuilds the comparison report from the eval files of a finished run.
// Throws DataError when a required file is missing or malformed.
ExperimentReport report_experiment(const std::filesystem::path& run_dir);

}  // namespace revknn::cli

#endif  // REVKNN_TOOLS_CLI_H_
