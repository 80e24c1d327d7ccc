// Copyright 2026 The pileaff Authors
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

// File-based implementations of the command-line subcommands. Each returns a short summary and
// writes its artifacts (with the config hash embedded) under the requested paths.

#include <cstdint>
#include <optional>
#include <string>

#include "pileaff/harness.hpp"

namespace pileaff {

struct CommandOptions {
  std::string module;    // retrieve | place | pick
  std::string scenario;  // single scenario; empty = the config's scenario list
  std::string split;     // empty = seen
  std::string method = "full";
  std::string retrieve_ckpt;
  std::string place_ckpt;
  std::string pick_ckpt;
  std::string dataset;
  std::string input;   // scene snapshot
  std::string output;  // primary output path; empty = a default under output_dir
  std::int64_t count = -1;   // samples, scenes or candidates; -1 = config default
  std::int64_t epochs = -1;  // -1 = config default
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> scene_seed;
  int pick_index = -1;
  bool low_p_high_only = false;
};

std::string cmdGenScenes(const RunConfig& cfg, const CommandOptions& o);
std::string cmdCollect(const RunConfig& cfg, const CommandOptions& o);
std::string cmdTrain(const RunConfig& cfg, const CommandOptions& o);
std::string cmdOnlineTune(const RunConfig& cfg, const CommandOptions& o);
std::string cmdEval(const RunConfig& cfg, const CommandOptions& o);
std::string cmdSweepRounds(const RunConfig& cfg, const CommandOptions& o);
std::string cmdOracle(const RunConfig& cfg, const CommandOptions& o);
std::string cmdExportAffordance(const RunConfig& cfg, const CommandOptions& o);
/// Throws Error(kIncomplete) after writing the log when the episode hits its action budget.
std::string cmdRunEpisode(const RunConfig& cfg, const CommandOptions& o);

/// Loads a checkpoint and checks it against the module and the configured point count.
ModelF loadModelChecked(const std::string& path, ModuleKind expected, const RunConfig& cfg);

}  // namespace pileaff
