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

// Run configuration, evaluation protocol, adaptation-round sweep, labelling oracle and exports.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pileaff/env.hpp"
#include "pileaff/policy.hpp"
#include "pileaff/training.hpp"

namespace pileaff {

struct CollectCounts {
  std::size_t retrieve = 4000;
  std::size_t place = 800;
  std::size_t pick = 800;
};

struct TrainSettings {
  int retrieve_epochs = 35;
  int place_epochs = 40;
  int pick_epochs = 40;
  int retrieve_batch = 128;
  int place_batch = 64;
  int pick_batch = 128;
  AdamParams adam;
  double holdout_fraction = 0.1;
};

struct EvalSettings {
  int num_scenes = 100;  // per scenario
  std::uint64_t seed = 1000;
};

/// Everything a run needs. Loaded from JSON; unknown keys are rejected.
struct RunConfig {
  std::vector<ContainerKind> scenarios{ContainerKind::kWashingMachine, ContainerKind::kSofa, ContainerKind::kBasket};
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  EnvConfig env;
  CollectConfig collect;  // scenarios, seed, target_count and config_hash are filled per command
  CollectCounts counts;
  TrainSettings train;
  PolicyConfig policy;
  EvalSettings eval;
  FinetuneConfig finetune;  // scenarios and seed filled per command

  void validate() const;
  /// Canonical JSON of every field except output_dir.
  std::string canonicalJson() const;
  /// Hex digest of canonicalJson(); embedded in every artifact.
  std::string hash() const;
};

/// Parses JSON text; missing keys keep their defaults. Throws kConfig on malformed input.
RunConfig parseRunConfig(const std::string& json_text);
RunConfig loadRunConfig(const std::string& path);
/// Applies a "dotted.key=value" override (value parsed as JSON, else as a string).
void applyOverride(RunConfig& config, const std::string& assignment);
std::string runConfigJson(const RunConfig& config);

/// Per-scenario tallies of one evaluation.
struct ScenarioStats {
  ContainerKind scenario = ContainerKind::kBasket;
  int scenes = 0;
  int attempts = 0;
  int successes = 0;
  std::array<int, kNumFailureModes> failures{};
  int adaptations = 0;
  int forced = 0;
  int max_rounds = 0;
  int cleared = 0;
  int incomplete = 0;
  std::vector<double> delta_p_high;  // one per adaptation step

  double successRate() const { return attempts > 0 ? static_cast<double>(successes) / attempts : 0.0; }
  double clearedRate() const { return scenes > 0 ? static_cast<double>(cleared) / scenes : 0.0; }
};

struct EvalReport {
  std::string method;
  std::string config_hash;
  std::uint64_t seed = 0;
  Split split = Split::kSeen;
  std::vector<ScenarioStats> scenarios;
  std::vector<EpisodeLog> episodes;

  ScenarioStats pooled() const;
  /// Header comments state the provenance and the denominator; one row per scenario plus "all".
  std::string toCsv() const;
  std::string summary() const;
};

/// Named policy variants used by evaluation and sweeps.
enum class Method : std::uint8_t {
  kFull,
  kNoAdaptation,
  kNoPickAfford,
  kNoPlaceAfford,
  kRandomAdapt,  // three rounds of random pick and place
  kRandomPoint,
  kHighestPoint,
};
const char* methodName(Method m);
Method parseMethod(const std::string& name);
PolicyConfig policyFor(Method m, const PolicyConfig& base);

/// Seeded evaluation scene i of a scenario (skipping seeds that fail to generate).
std::vector<SceneRef> evalScenes(SceneCache& scenes, ContainerKind scenario, Split split, int count,
                                 std::uint64_t seed);
/// Scenes whose first observation has P_high <= gate under the retrieval model.
std::vector<SceneRef> lowPHighScenes(SceneCache& scenes, const std::vector<SceneRef>& refs, Split split,
                                     const ModelF& retrieval, const PolicyConfig& policy);

/// Runs one episode per scene and tallies per scenario (in first-appearance order).
EvalReport evaluateScenes(const PolicyModels& models, SceneCache& scenes, const std::vector<SceneRef>& refs,
                          Split split, const PolicyConfig& policy, const std::string& method,
                          const std::string& config_hash, std::uint64_t seed);

/// evaluateScenes over evalScenes() of every scenario. Throws kConfig for num_scenes <= 0.
EvalReport evaluate(const PolicyModels& models, SceneCache& scenes, const std::vector<ContainerKind>& scenarios,
                    int num_scenes, std::uint64_t seed, Split split, Method method, const PolicyConfig& base,
                    const std::string& config_hash);

struct SweepRow {
  std::string setting;  // "0", "1", "2", "3", "3-rand"
  EvalReport report;
};
/// Rounds 0..3 with learned adaptation plus three rounds of random adaptation, over the same scenes.
std::vector<SweepRow> adaptationRoundSweep(const PolicyModels& models, SceneCache& scenes,
                                           const std::vector<SceneRef>& refs, Split split, const PolicyConfig& base,
                                           const std::string& config_hash, std::uint64_t seed);
std::string sweepCsv(const std::vector<SweepRow>& rows, const std::string& config_hash, std::uint64_t seed);

/// Executes retrieval at every candidate observed point from the same snapshot and returns the
/// indices that succeed. At most 64 candidates. The scene is left untouched.
std::vector<int> bruteForceOracle(const SceneState& scene, const EnvConfig& env, const PointCloudObs& obs,
                                  const std::vector<int>& candidates);

/// ASCII PLY with per-vertex x y z affordance; comments carry the provenance.
void exportAffordance(const std::string& path, const Cloud& points, const std::vector<double>& scores,
                      const std::string& config_hash = "", std::uint64_t seed = 0);
struct AffordancePly {
  Cloud points;
  std::vector<double> scores;
};
AffordancePly readAffordancePly(const std::string& path);

/// Evaluates the policy on each template split.
std::vector<EvalReport> generalizationEval(const PolicyModels& models, SceneCache& scenes,
                                           const std::vector<ContainerKind>& scenarios, int num_scenes,
                                           std::uint64_t seed, const PolicyConfig& base,
                                           const std::string& config_hash);

/// Template-level disjointness: no template object is shared between the seen split and a held-out one.
bool splitsDisjoint(const TemplatePool& pool);

}  // namespace pileaff
