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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pileaff/garment.hpp"
#include "pileaff/sim.hpp"

namespace pileaff {

enum class Split : std::uint8_t { kSeen = 0, kNovelShape = 1, kNovelCategory = 2 };
const char* splitName(Split s);
Split parseSplit(const std::string& name);

struct PoolEntry {
  std::shared_ptr<const GarmentTemplate> tmpl;
  Split split = Split::kSeen;
};

struct TemplatePool {
  std::vector<PoolEntry> entries;

  /// Entries of one split, in declaration order.
  std::vector<std::shared_ptr<const GarmentTemplate>> select(Split split) const;
};

/// Nine categories; seen categories carry one seen and one held-out aspect ratio, scarf and hat are
/// held-out categories.
TemplatePool defaultTemplatePool(const StiffnessProfile& profile = {}, double spacing = 0.05);

struct GenerationParams {
  double crumple_amplitude = 0.01;
  double fold_probability = 0.35;
  double max_tilt = 0.25;        // rad
  double drop_clearance = 0.06;  // m above the current pile top
  int max_spawn_attempts = 24;
};

/// Drops `num_garments` garments drawn (seeded) from `templates` one by one, settling after each.
/// Deterministic in (scenario, num_garments, seed, templates, params).
SceneState generateScene(ContainerKind scenario, int num_garments, std::uint64_t seed,
                         const std::vector<std::shared_ptr<const GarmentTemplate>>& templates,
                         const SimParams& sim, const GenerationParams& gen = {});

/// Drops one more garment into an existing scene and settles; used by generateScene.
void dropGarment(SceneState& state, std::shared_ptr<const GarmentTemplate> tmpl, std::uint32_t garment_id,
                 const SimParams& sim, const GenerationParams& gen, bool settle_after = true);

}  // namespace pileaff
