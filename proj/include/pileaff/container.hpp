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
#include <string>
#include <vector>

#include "pileaff/common.hpp"

namespace pileaff {

enum class ContainerKind : std::uint8_t { kWashingMachine = 0, kBasket = 1, kSofa = 2 };
inline constexpr int kNumScenarios = 3;

const char* scenarioName(ContainerKind kind);
ContainerKind parseScenario(const std::string& name);

/// Container geometry. Fields not used by a kind are ignored.
///
/// Basket: open-top box with inner half extents (half_x, half_y); the bottom's top surface sits at
/// floor_height and the rim at rim_height. Walls are wall_thickness thick.
/// Sofa: seat block with half extents (half_x, half_y) and top at floor_height; arms reach
/// rim_height and the back reaches back_height (thickness wall_thickness, back at +y).
/// WashingMachine: static drum, a horizontal cylinder along y of drum_radius whose axis sits at
/// drum_axis_height, spanning y in [-drum_depth, -lip_depth]; a circular opening of radius
/// drum_radius - lip_height runs through the front panel at y = 0 and faces +y.
struct Container {
  ContainerKind kind = ContainerKind::kBasket;
  double half_x = 0.0;
  double half_y = 0.0;
  double floor_height = 0.0;
  double rim_height = 0.0;
  double back_height = 0.0;
  double wall_thickness = 0.0;
  double drum_radius = 0.0;
  double drum_depth = 0.0;
  double drum_axis_height = 0.0;
  double panel_half_width = 0.0;  // washing-machine front panel
  double panel_height = 0.0;
  double lip_height = 0.0;  // door lip: the opening radius is drum_radius - lip_height
  double lip_depth = 0.0;   // lip thickness along y
  Aabb exit_region;  // "outside the container"

  bool operator==(const Container&) const = default;
};

Container makeContainer(ContainerKind kind);

/// Height used to derive the lift height: basket rim, sofa arm, drum axis.
double referenceHeight(const Container& c);

/// True if p lies in the container interior (where garments rest before retrieval).
bool interiorContains(const Container& c, const Vec3& p);

/// Box bounding the interior; used for spawning and the disjointness check.
Aabb interiorBounds(const Container& c);

/// Solid boxes that particles collide with (basket bottom and walls, sofa blocks).
std::vector<Aabb> solidBoxes(const Container& c);

/// Support surface the garments rest on: height at (x, y), for the place lattice.
double supportHeight(const Container& c, double x, double y);

struct SurfaceContact {
  Vec3 normal;         // unit, pointing from the surface into the particle
  double penetration;  // > 0
};

/// Calls `fn(contact)` for every container or floor surface within `radius` of p, in a fixed order.
template <typename Fn>
void forEachSurfaceContact(const Container& c, const std::vector<Aabb>& boxes, const Vec3& p, double radius,
                           Fn&& fn);

}  // namespace pileaff

#include "pileaff/container_inl.hpp"
