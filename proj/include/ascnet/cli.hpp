// Copyright 2026 The ascnet Authors
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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ascnet/topology.hpp"
#include "ascnet/trainer.hpp"

namespace ascnet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Topology choice plus training hyperparameters, read from a JSON object.
struct RunConfig {
  TopologyKind topology = TopologyKind::vgg;
  TopologyOptions options;
  TrainConfig train;
};

// Unknown keys and wrongly typed values throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig read_run_config(const std::string& path);

// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ascnet::cli
