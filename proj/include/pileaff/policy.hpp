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

// Inference-time controller: gate on the share of high retrieval scores, adapt the pile with
// pick-and-place while the gate is closed, otherwise retrieve at the best-scored point.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pileaff/env.hpp"
#include "pileaff/net.hpp"

namespace pileaff {

/// How a point is chosen for one role.
enum class Chooser : std::uint8_t { kLearned = 0, kRandom = 1, kHighest = 2 };
const char* chooserName(Chooser c);
Chooser parseChooser(const std::string& name);

struct PolicyConfig {
  double high_score_threshold = 0.9;
  double p_high_gate = 0.1;
  int max_adapt_rounds = 3;
  Chooser retrieve = Chooser::kLearned;  // kRandom / kHighest are the baselines; they never adapt
  Chooser pick = Chooser::kLearned;      // kRandom: seeded-uniform pick index
  Chooser place = Chooser::kLearned;     // kRandom: seeded-uniform place candidate
  std::uint64_t seed = 0;                // stream for random choices

  void validate() const;
};

/// Frozen models used by the controller; place and pick may be null when not needed.
struct PolicyModels {
  const ModelF* retrieve = nullptr;
  const ModelF* place = nullptr;
  const ModelF* pick = nullptr;
};

/// Fraction of scores strictly above threshold.
double pHigh(const std::vector<double>& scores, double threshold);

enum class Decision : std::uint8_t { kRetrieve = 0, kAdapt = 1 };
/// Retrieve iff pHigh(map, high_score_threshold) > p_high_gate.
Decision decide(const std::vector<double>& map, const PolicyConfig& config);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmaxIndex(const std::vector<double>& scores);

/// Index of the highest observed point (largest z); ties go to the lowest index.
std::size_t highestIndex(const Cloud& cloud);

enum class StepKind : std::uint8_t { kAdapt = 0, kRetrieve = 1 };

struct StepRecord {
  int step = 0;
  StepKind kind = StepKind::kRetrieve;
  bool forced = false;  // retrieval after the adaptation rounds ran out with the gate still closed
  int round = 0;        // adaptation round within the current retrieval, 1-based
  int pick_index = -1;
  int place_index = -1;  // into placeCandidates()
  int retrieve_index = -1;
  Vec3 pick_point;
  Vec3 place_point;
  Vec3 retrieve_point;
  double p_high_before = 0.0;
  double p_high_after = 0.0;  // adaptation only
  bool grasp_miss = false;
  ActionOutcome outcome;  // retrieval only
};

struct EpisodeLog {
  ContainerKind scenario = ContainerKind::kBasket;
  std::uint64_t scene_seed = 0;
  int initial_garments = 0;
  double initial_p_high = 0.0;
  std::vector<StepRecord> steps;
  std::vector<std::uint32_t> removed_ids;  // garments no longer in the container
  int remaining = 0;
  int attempts = 0;
  int successes = 0;
  std::array<int, kNumFailureModes> failures{};
  bool incomplete = false;

  int adaptations() const;
  /// Largest number of adaptation rounds spent before any single retrieval.
  int maxRoundsPerRetrieval() const;
  /// One line per decision.
  std::string toText() const;
};

/// One pick-and-place round on a settled state. `obs` must be the current observation and
/// `retrieval_map` its retrieval scores. Throws kConfig when there are no place candidates.
StepRecord adaptStep(const PolicyModels& models, SceneState& state, const EnvConfig& env, const PolicyConfig& config,
                     const PointCloudObs& obs, const std::vector<double>& retrieval_map, Rng& rng);

/// Runs the loop until the container is empty or the action budget (garments * 4 + 5) is spent.
EpisodeLog runEpisode(const PolicyModels& models, SceneState state, const EnvConfig& env, const PolicyConfig& config,
                      std::uint64_t scene_seed = 0);

}  // namespace pileaff
