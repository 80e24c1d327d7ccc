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

#include "pileaff/garment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pileaff {

namespace {

constexpr const char* kCategoryNames[kNumCategories] = {
    "top", "trousers", "dress", "skirt", "onesie", "underpants", "glove", "hat", "scarf"};

}  // namespace

const char* categoryName(Category c) { return kCategoryNames[static_cast<int>(c)]; }

Category parseCategory(const std::string& name) {
  for (int i = 0; i < kNumCategories; ++i) {
    if (name == kCategoryNames[i]) return static_cast<Category>(i);
  }
  fail(ErrorCode::kConfig, "unknown garment category '" + name + "'");
}

std::size_t GarmentTemplate::countSprings(SpringKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(springs.begin(), springs.end(), [kind](const Spring& s) { return s.kind == kind; }));
}

GarmentTemplate makeTemplate(Category category, int rows, int cols, double spacing,
                             const StiffnessProfile& profile, std::string template_id) {
  require(rows >= 2 && cols >= 2, ErrorCode::kInvalidParameter, "garment grid needs rows, cols >= 2");
  require(spacing > 0.0 && std::isfinite(spacing), ErrorCode::kInvalidParameter, "spacing must be > 0");
  require(profile.particle_mass > 0.0, ErrorCode::kInvalidParameter, "particle_mass must be > 0");
  require(profile.k_struct > 0.0 && profile.k_shear > 0.0 && profile.k_bend > 0.0,
          ErrorCode::kInvalidParameter, "spring stiffnesses must be > 0");

  GarmentTemplate t;
  t.category = category;
  t.rows = rows;
  t.cols = cols;
  t.spacing = spacing;
  t.particle_mass = profile.particle_mass;
  t.k_struct = profile.k_struct;
  t.k_shear = profile.k_shear;
  t.k_bend = profile.k_bend;
  if (template_id.empty()) {
    std::ostringstream os;
    os << categoryName(category) << '_' << rows << 'x' << cols;
    template_id = os.str();
  }
  t.template_id = std::move(template_id);

  auto add = [&](int r0, int c0, int r1, int c1, double rest, SpringKind kind) {
    t.springs.push_back(Spring{static_cast<std::uint32_t>(t.index(r0, c0)),
                               static_cast<std::uint32_t>(t.index(r1, c1)), rest, kind});
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) add(r, c, r, c + 1, spacing, SpringKind::kStructural);
      if (r + 1 < rows) add(r, c, r + 1, c, spacing, SpringKind::kStructural);
    }
  }
  const double diag = spacing * std::sqrt(2.0);
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      add(r, c, r + 1, c + 1, diag, SpringKind::kShear);
      add(r, c + 1, r + 1, c, diag, SpringKind::kShear);
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 2 < cols) add(r, c, r, c + 2, 2.0 * spacing, SpringKind::kBend);
      if (r + 2 < rows) add(r, c, r + 2, c, 2.0 * spacing, SpringKind::kBend);
    }
  }
  return t;
}

Pose Pose::fromYawPitchRoll(double yaw, double pitch, double roll, const Vec3& t) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  Pose p;
  p.rotation = {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
                sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
                -sp,     cp * sr,                cp * cr};
  p.translation = t;
  return p;
}

Vec3 GarmentInstance::centroid() const {
  Vec3 c;
  for (const auto& p : positions) c += p;
  return positions.empty() ? c : c / static_cast<double>(positions.size());
}

std::vector<Vec3> restGrid(const GarmentTemplate& tmpl, const std::vector<Fold>& folds) {
  const double s = tmpl.spacing;
  const double x0 = -0.5 * (tmpl.cols - 1) * s;
  const double y0 = -0.5 * (tmpl.rows - 1) * s;
  std::vector<Vec3> pts(static_cast<std::size_t>(tmpl.particleCount()));
  for (int r = 0; r < tmpl.rows; ++r) {
    for (int c = 0; c < tmpl.cols; ++c) {
      pts[static_cast<std::size_t>(tmpl.index(r, c))] = Vec3{x0 + c * s, y0 + r * s, 0.0};
    }
  }
  for (const Fold& f : folds) {
    const int limit = f.along_rows ? tmpl.rows : tmpl.cols;
    require(f.after >= 0 && f.after + 1 < limit, ErrorCode::kInvalidParameter, "fold line outside grid");
    double z_top = 0.0;
    for (const auto& p : pts) z_top = std::max(z_top, p.z);
    const double line = f.along_rows ? y0 + (f.after + 0.5) * s : x0 + (f.after + 0.5) * s;
    for (int r = 0; r < tmpl.rows; ++r) {
      for (int c = 0; c < tmpl.cols; ++c) {
        const int k = f.along_rows ? r : c;
        if (k <= f.after) continue;
        Vec3& p = pts[static_cast<std::size_t>(tmpl.index(r, c))];
        if (f.along_rows) {
          p.y = 2.0 * line - p.y;
        } else {
          p.x = 2.0 * line - p.x;
        }
        // Reflect the layer stack about the plane half a spacing above the current top.
        p.z = 2.0 * z_top + s - p.z;
      }
    }
  }
  return pts;
}

GarmentInstance instantiate(std::shared_ptr<const GarmentTemplate> tmpl, const Pose& pose,
                            double crumple_amplitude, std::uint64_t seed, std::uint32_t garment_id,
                            const std::vector<Fold>& folds) {
  require(tmpl != nullptr, ErrorCode::kInvalidParameter, "instantiate: null template");
  require(crumple_amplitude >= 0.0 && std::isfinite(crumple_amplitude), ErrorCode::kInvalidParameter,
          "crumple_amplitude must be >= 0");
  GarmentInstance g;
  g.garment_id = garment_id;
  g.positions = restGrid(*tmpl, folds);
  Rng rng(seed);
  for (auto& p : g.positions) {
    p = pose.apply(p);
    if (crumple_amplitude > 0.0) {
      const double dx = uniform(rng, -crumple_amplitude, crumple_amplitude);
      const double dy = uniform(rng, -crumple_amplitude, crumple_amplitude);
      const double dz = uniform(rng, -crumple_amplitude, crumple_amplitude);
      p += Vec3{dx, dy, dz};
    }
  }
  g.velocities.assign(g.positions.size(), Vec3{});
  g.tmpl = std::move(tmpl);
  return g;
}

}  // namespace pileaff
