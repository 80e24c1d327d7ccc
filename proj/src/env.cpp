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

#include "pileaff/env.hpp"

namespace pileaff {

void EnvConfig::validate() const {
  sim.validate();
  require(num_points > 0, ErrorCode::kConfig, "num_points must be > 0");
  require(lattice_spacing > 0.0, ErrorCode::kConfig, "lattice_spacing must be > 0");
  require(min_garments >= 1 && max_garments <= 5 && min_garments <= max_garments, ErrorCode::kConfig,
          "garment counts must satisfy 1 <= min <= max <= 5");
  require(thresholds.grasp_radius > 0.0 && thresholds.tau_drag > 0.0 && thresholds.floor_eps >= 0.0,
          ErrorCode::kConfig, "action thresholds must be positive");
  require(motion.speed > 0.0 && motion.lift_factor > 0.0, ErrorCode::kConfig, "motion speed and lift must be > 0");
}

int garmentCountFor(const EnvConfig& env, std::uint64_t scene_seed) {
  const auto span = static_cast<std::uint64_t>(env.max_garments - env.min_garments + 1);
  return env.min_garments + static_cast<int>(mixSeed(scene_seed, 0x6a7) % span);
}

SceneState makeScene(const EnvConfig& env, const TemplatePool& pool, ContainerKind scenario, Split split,
                     std::uint64_t scene_seed) {
  const auto templates = pool.select(split);
  require(!templates.empty(), ErrorCode::kConfig, std::string("no templates in split ") + splitName(split));
  return generateScene(scenario, garmentCountFor(env, scene_seed), scene_seed, templates, env.sim, env.gen);
}

PointCloudObs observe(const EnvConfig& env, const SceneState& state) {
  return renderCloud(state, defaultCamera(state.container.kind), static_cast<std::size_t>(env.num_points),
                     env.sim.contact_radius);
}

std::vector<Vec3> placeCandidates(const EnvConfig& env, ContainerKind scenario, const Cloud& cloud) {
  std::vector<Vec3> out = cloud;
  const auto lattice = supportLattice(makeContainer(scenario), env.lattice_spacing);
  out.insert(out.end(), lattice.begin(), lattice.end());
  return out;
}

SceneState SceneCache::get(ContainerKind scenario, Split split, std::uint64_t scene_seed) {
  const Key key{static_cast<int>(scenario), static_cast<int>(split), scene_seed};
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = snapshots_.find(key); it != snapshots_.end()) return restore(it->second);
    if (auto it = failures_.find(key); it != failures_.end()) fail(ErrorCode::kSceneGeneration, it->second);
  }
  try {
    SceneState s = makeScene(env_, pool_, scenario, split, scene_seed);
    std::lock_guard<std::mutex> lock(mutex_);
    snapshots_.emplace(key, snapshot(s));
    return s;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSceneGeneration && e.code() != ErrorCode::kNumerical) throw;
    std::lock_guard<std::mutex> lock(mutex_);
    failures_.emplace(key, e.what());
    fail(ErrorCode::kSceneGeneration, e.what());
  }
}

SceneRef sceneAt(const std::vector<ContainerKind>& scenarios, std::uint64_t seed, std::uint64_t i) {
  require(!scenarios.empty(), ErrorCode::kConfig, "no scenarios selected");
  return {scenarios[i % scenarios.size()], mixSeed(seed, 0x5ce0000 + i)};
}

}  // namespace pileaff
