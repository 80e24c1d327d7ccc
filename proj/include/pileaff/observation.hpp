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
#include <vector>

#include "pileaff/sim.hpp"

namespace pileaff {

struct CameraPose {
  Vec3 position;
  Vec3 look_at;
  double fov_deg = 50.0;  // vertical and horizontal (square grid)
  int width = 160;
  int height = 160;

  void validate() const;
};

/// Front view into the drum for the washing machine, top-down for basket and sofa.
CameraPose defaultCamera(ContainerKind kind);

struct Provenance {
  std::uint32_t garment_id = 0;
  std::uint32_t particle = 0;

  bool operator==(const Provenance&) const = default;
};

/// Network input: coordinates only.
using Cloud = std::vector<Vec3>;

struct PointCloudObs {
  Cloud points;
  std::vector<Provenance> provenance;  // side channel for labeling and audits
  std::uint64_t scene_ref = 0;         // hash of the rendered scene snapshot

  std::size_t size() const { return points.size(); }
};

/// Greedy max-min selection of n indices starting at start_index; ties go to the lowest index.
std::vector<std::uint32_t> farthestPointSample(const std::vector<Vec3>& points, std::size_t n,
                                                std::size_t start_index);

/// First particle-sphere hit per ray of the camera grid; the floor plane occludes. Every hit is
/// kept, then reduced or padded to exactly n points. Throws kEmptyObservation if nothing is visible.
PointCloudObs renderCloud(const SceneState& state, const CameraPose& camera, std::size_t n, double contact_radius);

/// Place candidates on the container support surface, row-major over the support footprint.
std::vector<Vec3> supportLattice(const Container& c, double spacing);

}  // namespace pileaff
