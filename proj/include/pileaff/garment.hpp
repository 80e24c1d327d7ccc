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

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pileaff/common.hpp"

namespace pileaff {

/// Garment category. Metadata only; the physics sees rows, cols and stiffness.
enum class Category : std::uint8_t {
  kTop = 0,
  kTrousers,
  kDress,
  kSkirt,
  kOnesie,
  kUnderpants,
  kGlove,
  kHat,
  kScarf,
};
inline constexpr int kNumCategories = 9;

const char* categoryName(Category c);
Category parseCategory(const std::string& name);

enum class SpringKind : std::uint8_t { kStructural = 0, kShear = 1, kBend = 2 };

struct Spring {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double rest = 0.0;
  SpringKind kind = SpringKind::kStructural;
};

struct StiffnessProfile {
  double particle_mass = 0.01;  // kg
  double k_struct = 80.0;       // N/m
  double k_shear = 40.0;
  double k_bend = 20.0;
};

struct GarmentTemplate {
  std::string template_id;
  Category category = Category::kTop;
  int rows = 0;
  int cols = 0;
  double spacing = 0.05;  // m
  double particle_mass = 0.01;
  double k_struct = 80.0;
  double k_shear = 40.0;
  double k_bend = 20.0;
  std::vector<Spring> springs;  // structural, then shear, then bend

  int particleCount() const { return rows * cols; }
  int index(int r, int c) const { return r * cols + c; }
  double stiffness(SpringKind kind) const {
    switch (kind) {
      case SpringKind::kStructural: return k_struct;
      case SpringKind::kShear: return k_shear;
      case SpringKind::kBend: return k_bend;
    }
    return 0.0;
  }
  std::size_t countSprings(SpringKind kind) const;
};

/// Builds a template with the full spring enumeration. Throws kInvalidParameter on bad dimensions.
GarmentTemplate makeTemplate(Category category, int rows, int cols, double spacing,
                             const StiffnessProfile& profile = {}, std::string template_id = {});

/// Row-major 3x3 rotation plus translation.
struct Pose {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 translation;

  Vec3 apply(const Vec3& p) const {
    const auto& r = rotation;
    return Vec3{r[0] * p.x + r[1] * p.y + r[2] * p.z, r[3] * p.x + r[4] * p.y + r[5] * p.z,
                r[6] * p.x + r[7] * p.y + r[8] * p.z} +
           translation;
  }

  static Pose identity() { return {}; }
  /// Z-Y-X intrinsic rotation (yaw about z, then pitch about y, then roll about x).
  static Pose fromYawPitchRoll(double yaw, double pitch, double roll, const Vec3& t);
};

/// Folds the part of the grid past a line over onto the rest, one spacing above it.
struct Fold {
  bool along_rows = true;  // true: fold between row `after` and `after + 1`
  int after = 0;
};

struct GarmentInstance {
  std::shared_ptr<const GarmentTemplate> tmpl;
  std::uint32_t garment_id = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  const std::vector<Spring>& springs() const { return tmpl->springs; }
  std::size_t size() const { return positions.size(); }
  Vec3 centroid() const;
};

/// Flat (optionally folded) grid in the template's local frame, centered on the origin in z = 0.
std::vector<Vec3> restGrid(const GarmentTemplate& tmpl, const std::vector<Fold>& folds = {});

/// Flat grid transformed by `pose`, each particle offset by a seeded uniform draw in
/// [-crumple_amplitude, crumple_amplitude]^3. Pure function of its arguments.
GarmentInstance instantiate(std::shared_ptr<const GarmentTemplate> tmpl, const Pose& pose,
                            double crumple_amplitude, std::uint64_t seed, std::uint32_t garment_id = 0,
                            const std::vector<Fold>& folds = {});

}  // namespace pileaff
