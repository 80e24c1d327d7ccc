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

// Shared environment settings and seeded scene sources used by collection, policy and evaluation.

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "pileaff/action.hpp"
#include "pileaff/observation.hpp"
#include "pileaff/scene.hpp"

namespace pileaff {

struct EnvConfig {
  SimParams sim;
  GenerationParams gen;
  ActionThresholds thresholds;
  MotionParams motion;
  int num_points = 512;
  double lattice_spacing = 0.05;  // m, place candidates on the support surface
  int min_garments = 2;
  int max_garments = 3;

  void validate() const;
};

/// Garment count of a scene, drawn from [min_garments, max_garments] by the scene seed.
int garmentCountFor(const EnvConfig& env, std::uint64_t scene_seed);

/// Seeded scene for (scenario, split, scene_seed); deterministic.
SceneState makeScene(const EnvConfig& env, const TemplatePool& pool, ContainerKind scenario, Split split,
                     std::uint64_t scene_seed);

PointCloudObs observe(const EnvConfig& env, const SceneState& state);

/// Place candidates: the observed points followed by the support lattice of the scenario.
std::vector<Vec3> placeCandidates(const EnvConfig& env, ContainerKind scenario, const Cloud& cloud);

/// Thread-safe memo of generated scenes, stored as snapshots.
class SceneCache {
 public:
  SceneCache(const EnvConfig& env, const TemplatePool& pool) : env_(env), pool_(pool) {}

  /// Throws Error(kSceneGeneration) for seeds whose scene cannot be generated.
  SceneState get(ContainerKind scenario, Split split, std::uint64_t scene_seed);
  const EnvConfig& env() const { return env_; }
  const TemplatePool& pool() const { return pool_; }

 private:
  using Key = std::tuple<int, int, std::uint64_t>;
  EnvConfig env_;
  const TemplatePool& pool_;
  std::mutex mutex_;
  std::map<Key, std::string> snapshots_;
  std::map<Key, std::string> failures_;
};

/// The i-th scene of a stream: scenario round-robin over `scenarios`, seed mixed from (seed, i).
struct SceneRef {
  ContainerKind scenario = ContainerKind::kBasket;
  std::uint64_t scene_seed = 0;
};
SceneRef sceneAt(const std::vector<ContainerKind>& scenarios, std::uint64_t seed, std::uint64_t i);

}  // namespace pileaff
