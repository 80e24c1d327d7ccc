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

#include "pileaff/container.hpp"

#include <cmath>
#include <sstream>

namespace pileaff {

const char* scenarioName(ContainerKind kind) {
  switch (kind) {
    case ContainerKind::kWashingMachine: return "WashingMachine";
    case ContainerKind::kBasket: return "Basket";
    case ContainerKind::kSofa: return "Sofa";
  }
  return "?";
}

ContainerKind parseScenario(const std::string& name) {
  if (name == "WashingMachine" || name == "washing_machine" || name == "wm") return ContainerKind::kWashingMachine;
  if (name == "Basket" || name == "basket") return ContainerKind::kBasket;
  if (name == "Sofa" || name == "sofa") return ContainerKind::kSofa;
  fail(ErrorCode::kConfig, "unknown scenario '" + name + "'");
}

Container makeContainer(ContainerKind kind) {
  Container c;
  c.kind = kind;
  switch (kind) {
    case ContainerKind::kBasket:
      c.half_x = 0.28;
      c.half_y = 0.23;
      c.floor_height = 0.04;
      c.rim_height = 0.33;
      c.wall_thickness = 0.02;
      c.exit_region = Aabb{{0.42, -0.35, -0.05}, {1.02, 0.35, 1.0}};
      break;
    case ContainerKind::kSofa:
      c.half_x = 0.5;
      c.half_y = 0.32;
      c.floor_height = 0.22;
      c.rim_height = 0.36;
      c.back_height = 0.65;
      c.wall_thickness = 0.12;
      c.exit_region = Aabb{{-0.4, -1.05, -0.05}, {0.4, -0.45, 1.0}};
      break;
    case ContainerKind::kWashingMachine:
      c.drum_radius = 0.27;
      c.drum_depth = 0.45;
      c.drum_axis_height = 0.36;
      c.panel_half_width = 0.32;
      c.panel_height = 0.85;
      c.lip_height = 0.06;
      c.lip_depth = 0.04;
      c.exit_region = Aabb{{-0.35, 0.25, -0.05}, {0.35, 0.9, 1.0}};
      break;
  }
  return c;
}

double referenceHeight(const Container& c) {
  switch (c.kind) {
    case ContainerKind::kBasket: return c.rim_height;
    case ContainerKind::kSofa: return c.rim_height;
    case ContainerKind::kWashingMachine: return c.drum_axis_height;
  }
  return 0.0;
}

Aabb interiorBounds(const Container& c) {
  switch (c.kind) {
    case ContainerKind::kBasket:
      return Aabb{{-c.half_x, -c.half_y, c.floor_height - 0.02}, {c.half_x, c.half_y, c.rim_height + 0.25}};
    case ContainerKind::kSofa:
      return Aabb{{-c.half_x, -c.half_y, c.floor_height - 0.02}, {c.half_x, c.half_y, c.floor_height + 0.6}};
    case ContainerKind::kWashingMachine:
      return Aabb{{-c.drum_radius, -c.drum_depth, c.drum_axis_height - c.drum_radius},
                  {c.drum_radius, 0.02, c.drum_axis_height + c.drum_radius}};
  }
  return {};
}

bool interiorContains(const Container& c, const Vec3& p) {
  if (c.kind == ContainerKind::kWashingMachine) {
    const double dz = p.z - c.drum_axis_height;
    return p.y >= -c.drum_depth && p.y <= 0.02 && std::sqrt(p.x * p.x + dz * dz) < c.drum_radius + 0.02;
  }
  return interiorBounds(c).contains(p);
}

std::vector<Aabb> solidBoxes(const Container& c) {
  std::vector<Aabb> boxes;
  const double t = c.wall_thickness;
  switch (c.kind) {
    case ContainerKind::kBasket:
      boxes.push_back({{-c.half_x - t, -c.half_y - t, 0.0}, {c.half_x + t, c.half_y + t, c.floor_height}});
      boxes.push_back({{-c.half_x - t, -c.half_y - t, 0.0}, {-c.half_x, c.half_y + t, c.rim_height}});
      boxes.push_back({{c.half_x, -c.half_y - t, 0.0}, {c.half_x + t, c.half_y + t, c.rim_height}});
      boxes.push_back({{-c.half_x, -c.half_y - t, 0.0}, {c.half_x, -c.half_y, c.rim_height}});
      boxes.push_back({{-c.half_x, c.half_y, 0.0}, {c.half_x, c.half_y + t, c.rim_height}});
      break;
    case ContainerKind::kSofa:
      boxes.push_back({{-c.half_x, -c.half_y, 0.0}, {c.half_x, c.half_y, c.floor_height}});
      boxes.push_back({{-c.half_x - t, c.half_y, 0.0}, {c.half_x + t, c.half_y + t, c.back_height}});
      boxes.push_back({{-c.half_x - t, -c.half_y, 0.0}, {-c.half_x, c.half_y, c.rim_height}});
      boxes.push_back({{c.half_x, -c.half_y, 0.0}, {c.half_x + t, c.half_y, c.rim_height}});
      break;
    case ContainerKind::kWashingMachine:
      break;
  }
  return boxes;
}

double supportHeight(const Container& c, double x, double /*y*/) {
  if (c.kind == ContainerKind::kWashingMachine) {
    const double r = c.drum_radius;
    const double xx = std::min(std::abs(x), r);
    return c.drum_axis_height - std::sqrt(r * r - xx * xx);
  }
  return c.floor_height;
}

}  // namespace pileaff
