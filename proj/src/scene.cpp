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

#include "pileaff/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pileaff {

const char* splitName(Split s) {
  switch (s) {
    case Split::kSeen: return "seen";
    case Split::kNovelShape: return "novel-shape";
    case Split::kNovelCategory: return "novel-category";
  }
  return "?";
}

Split parseSplit(const std::string& name) {
  if (name == "seen") return Split::kSeen;
  if (name == "novel-shape" || name == "novel_shape") return Split::kNovelShape;
  if (name == "novel-category" || name == "novel_category") return Split::kNovelCategory;
  fail(ErrorCode::kConfig, "unknown split '" + name + "'");
}

std::vector<std::shared_ptr<const GarmentTemplate>> TemplatePool::select(Split split) const {
  std::vector<std::shared_ptr<const GarmentTemplate>> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e.tmpl);
  }
  return out;
}

TemplatePool defaultTemplatePool(const StiffnessProfile& profile, double spacing) {
  struct Row {
    Category cat;
    int rows, cols;
    Split split;
  };
  static constexpr Row kRows[] = {
      {Category::kTop, 8, 8, Split::kSeen},         {Category::kTop, 7, 9, Split::kNovelShape},
      {Category::kTrousers, 10, 6, Split::kSeen},   {Category::kTrousers, 11, 5, Split::kNovelShape},
      {Category::kDress, 10, 7, Split::kSeen},      {Category::kDress, 11, 6, Split::kNovelShape},
      {Category::kSkirt, 6, 7, Split::kSeen},       {Category::kSkirt, 5, 8, Split::kNovelShape},
      {Category::kOnesie, 9, 7, Split::kSeen},      {Category::kOnesie, 10, 6, Split::kNovelShape},
      {Category::kUnderpants, 5, 6, Split::kSeen},  {Category::kUnderpants, 4, 7, Split::kNovelShape},
      {Category::kGlove, 5, 4, Split::kSeen},       {Category::kGlove, 6, 3, Split::kNovelShape},
      {Category::kScarf, 12, 3, Split::kNovelCategory}, {Category::kScarf, 14, 2, Split::kNovelCategory},
      {Category::kHat, 6, 6, Split::kNovelCategory},    {Category::kHat, 5, 7, Split::kNovelCategory},
  };
  TemplatePool pool;
  for (const Row& r : kRows) {
    pool.entries.push_back(
        {std::make_shared<const GarmentTemplate>(makeTemplate(r.cat, r.rows, r.cols, spacing, profile)), r.split});
  }
  return pool;
}

namespace {

struct Extent {
  double lo_x, hi_x, lo_y, hi_y;
};

Extent extentOf(const std::vector<Vec3>& pts) {
  Extent e{1e300, -1e300, 1e300, -1e300};
  for (const auto& p : pts) {
    e.lo_x = std::min(e.lo_x, p.x);
    e.hi_x = std::max(e.hi_x, p.x);
    e.lo_y = std::min(e.lo_y, p.y);
    e.hi_y = std::max(e.hi_y, p.y);
  }
  return e;
}

/// Footprint (center, half extents) available for spawning.
constexpr int kFreeFallSteps = 10;

Aabb spawnFootprint(const Container& c, double r) {
  switch (c.kind) {
    case ContainerKind::kBasket:
    case ContainerKind::kSofa:
      return Aabb{{-c.half_x + r, -c.half_y + r, 0.0}, {c.half_x - r, c.half_y - r, 0.0}};
    case ContainerKind::kWashingMachine:
      return Aabb{{-0.8 * c.drum_radius, -c.drum_depth + r, 0.0}, {0.8 * c.drum_radius, -c.lip_depth - r, 0.0}};
  }
  return {};
}

bool spawnClear(const SceneState& s, const std::vector<Aabb>& boxes, const std::vector<Vec3>& pts, double r) {
  for (const auto& p : pts) {
    bool hit = false;
    forEachSurfaceContact(s.container, boxes, p, r, [&](const SurfaceContact&) { hit = true; });
    if (hit) return false;
    if (s.container.kind == ContainerKind::kWashingMachine) {
      const double dz = p.z - s.container.drum_axis_height;
      if (std::sqrt(p.x * p.x + dz * dz) > s.container.drum_radius - r || p.y > -s.container.lip_depth - r) {
        return false;
      }
    }
    for (const auto& g : s.garments) {
      for (const auto& q : g.positions) {
        if ((p - q).squaredNorm() < 4.0 * r * r) return false;
      }
    }
  }
  return true;
}

}  // namespace

void dropGarment(SceneState& state, std::shared_ptr<const GarmentTemplate> tmpl, std::uint32_t garment_id,
                 const SimParams& sim, const GenerationParams& gen, bool settle_after) {
  const Container& c = state.container;
  const double r = sim.contact_radius;
  const std::vector<Aabb> boxes = solidBoxes(c);
  const Aabb foot = spawnFootprint(c, r);
  const double foot_hx = 0.5 * (foot.hi.x - foot.lo.x);
  const double foot_hy = 0.5 * (foot.hi.y - foot.lo.y);

  double pile_top = 0.0;
  for (const auto& g : state.garments) {
    for (const auto& p : g.positions) pile_top = std::max(pile_top, p.z + r);
  }
  Rng& rng = state.rng;
  for (int attempt = 0; attempt < gen.max_spawn_attempts; ++attempt) {
    // Later attempts fold more eagerly so oversized garments still fit.
    const bool long_rows = tmpl->rows >= tmpl->cols;
    double yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
    if (c.kind == ContainerKind::kWashingMachine) {
      yaw = (long_rows ? 0.0 : 0.5 * std::numbers::pi) + uniform(rng, -0.3, 0.3);
    }
    std::vector<Fold> folds;
    const bool want_fold = uniform01(rng) < gen.fold_probability || attempt >= gen.max_spawn_attempts / 2;
    const double fold_frac = uniform(rng, 0.4, 0.6);
    if (want_fold) {
      const int n = long_rows ? tmpl->rows : tmpl->cols;
      const int after = std::clamp(static_cast<int>(std::floor(fold_frac * n)) - 1, 0, n - 2);
      folds.push_back(Fold{long_rows, after});
    }
    const double tilt = c.kind == ContainerKind::kWashingMachine ? 0.3 * gen.max_tilt : gen.max_tilt;
    const double pitch = uniform(rng, -tilt, tilt);
    const double roll = uniform(rng, -tilt, tilt);
    const double ux = uniform01(rng), uy = uniform01(rng);

    GarmentInstance g = instantiate(tmpl, Pose::fromYawPitchRoll(yaw, pitch, roll, Vec3{}), gen.crumple_amplitude,
                                    rng(), garment_id, folds);
    const Extent e = extentOf(g.positions);
    const double hx = 0.5 * (e.hi_x - e.lo_x), hy = 0.5 * (e.hi_y - e.lo_y);
    const double cx0 = 0.5 * (e.hi_x + e.lo_x), cy0 = 0.5 * (e.hi_y + e.lo_y);
    const double free_x = std::max(0.0, foot_hx - hx), free_y = std::max(0.0, foot_hy - hy);
    const double tx = foot.center().x + (2.0 * ux - 1.0) * free_x - cx0;
    const double ty = foot.center().y + (2.0 * uy - 1.0) * free_y - cy0;
    double min_z = 1e300;
    for (const auto& p : g.positions) min_z = std::min(min_z, p.z);
    double base = std::max(pile_top, supportHeight(c, tx + cx0, ty + cy0)) + gen.drop_clearance + r;
    if (c.kind == ContainerKind::kWashingMachine) {
      // Drop where the drum chord is wide enough for the garment.
      const double reach = c.drum_radius - 1.5 * r;
      const double half = std::min(hx + std::abs(foot.center().x + (2.0 * ux - 1.0) * free_x), reach);
      base = std::max(pile_top + gen.drop_clearance * 0.5 + r,
                      c.drum_axis_height - std::sqrt(reach * reach - half * half));
    }
    const Vec3 shift{tx, ty, base - min_z};
    for (auto& p : g.positions) p += shift;
    if (!spawnClear(state, boxes, g.positions, r)) continue;
    state.garments.push_back(std::move(g));
    if (settle_after) {
      for (int k = 0; k < kFreeFallSteps; ++k) step(state, sim);
      const SettleResult res = settle(state, sim);
      if (!res.settled) {
        std::ostringstream os;
        os << "garment " << garment_id << " did not settle within " << sim.settle_max_steps << " steps (KE "
           << res.kinetic_energy << " J)";
        fail(ErrorCode::kSceneGeneration, os.str());
      }
    }
    return;
  }
  fail(ErrorCode::kSceneGeneration, "no collision-free spawn pose for garment " + std::to_string(garment_id));
}

SceneState generateScene(ContainerKind scenario, int num_garments, std::uint64_t seed,
                         const std::vector<std::shared_ptr<const GarmentTemplate>>& templates,
                         const SimParams& sim, const GenerationParams& gen) {
  require(num_garments >= 1 && num_garments <= 5, ErrorCode::kPrecondition, "num_garments must be in [1, 5]");
  require(!templates.empty(), ErrorCode::kConfig, "empty template pool");
  sim.validate();
  SceneState s;
  s.container = makeContainer(scenario);
  s.rng.seed(mixSeed(seed, static_cast<std::uint64_t>(scenario) + 101));
  try {
    for (int k = 0; k < num_garments; ++k) {
      const auto& t = templates[uniformIndex(s.rng, templates.size())];
      dropGarment(s, t, static_cast<std::uint32_t>(k), sim, gen);
    }
  } catch (const Error& e) {
    std::ostringstream os;
    os << "scene generation failed (scenario " << scenarioName(scenario) << ", seed " << seed << "): " << e.what();
    fail(e.code() == ErrorCode::kNumerical ? ErrorCode::kNumerical : ErrorCode::kSceneGeneration, os.str());
  }
  return s;
}

}  // namespace pileaff
