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

#include "pileaff/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pileaff {

const char* failureModeName(FailureMode m) {
  switch (m) {
    case FailureMode::kNone: return "None";
    case FailureMode::kGraspMiss: return "GraspMiss";
    case FailureMode::kFloorContact: return "FloorContact";
    case FailureMode::kDragOut: return "DragOut";
    case FailureMode::kNotExtracted: return "NotExtracted";
  }
  return "?";
}

std::optional<Attachment> grasp(const SceneState& state, const Vec3& point, double grasp_radius) {
  require(grasp_radius > 0.0 && std::isfinite(grasp_radius), ErrorCode::kInvalidParameter,
          "grasp_radius must be > 0");
  require(point.finite(), ErrorCode::kInvalidParameter, "grasp point must be finite");
  double best = std::numeric_limits<double>::infinity();
  int best_g = -1;
  for (std::size_t g = 0; g < state.garments.size(); ++g) {
    for (const Vec3& p : state.garments[g].positions) {
      const double d2 = (p - point).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_g = static_cast<int>(g);
      }
    }
  }
  if (best_g < 0 || std::sqrt(best) > grasp_radius) return std::nullopt;
  const GarmentInstance& g = state.garments[static_cast<std::size_t>(best_g)];
  Attachment a;
  a.garment_id = g.garment_id;
  a.gripper = point;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if ((g.positions[p] - point).squaredNorm() <= grasp_radius * grasp_radius) {
      a.particles.push_back(static_cast<std::uint32_t>(p));
      a.offsets.push_back(g.positions[p] - point);
    }
  }
  return a;
}

double retrievalLiftHeight(const Container& c, const MotionParams& motion) {
  return motion.lift_factor * referenceHeight(c);
}

Vec3 exitWaypoint(const Container& c, double lift_height) {
  switch (c.kind) {
    case ContainerKind::kBasket: return {c.half_x + 0.5 * c.wall_thickness, 0.0, lift_height};
    case ContainerKind::kSofa: return {0.0, -c.half_y + 0.07, lift_height};
    case ContainerKind::kWashingMachine: return {0.0, 0.15, lift_height};
  }
  return {};
}

Vec3 dropPoint(const Container& c, double lift_height) {
  const Vec3 center = c.exit_region.center();
  return {center.x, center.y, lift_height};
}

RetrievalAction makeRetrievalAction(const Container& c, const Vec3& grasp_point, const MotionParams& motion) {
  RetrievalAction a;
  a.grasp_point = grasp_point;
  a.lift_height = std::max(retrievalLiftHeight(c, motion), grasp_point.z + 0.05);
  a.exit_waypoint = exitWaypoint(c, a.lift_height);
  a.drop_point = dropPoint(c, a.lift_height);
  a.speed = motion.speed;
  return a;
}

PickPlaceAction makePickPlaceAction(const Vec3& pick, const Vec3& place, const MotionParams& motion) {
  PickPlaceAction a;
  a.pick_point = pick;
  a.place_point = place;
  const double dx = place.x - pick.x, dy = place.y - pick.y;
  a.lift_height = std::max(pick.z, place.z) + motion.adapt_clearance +
                  motion.adapt_lift_slope * std::sqrt(dx * dx + dy * dy);
  a.speed = motion.speed;
  return a;
}

namespace {

struct Recorder {
  Trajectory* traj = nullptr;
  double radius = 0.0;
  int target_index = -1;

  void record(const SceneState& s, Phase phase) {
    if (!traj) return;
    TrajectoryRecord r;
    r.step = s.step_count;
    r.phase = phase;
    r.gripper = s.attachment ? s.attachment->gripper : Vec3{};
    r.centroids.reserve(traj->garment_ids.size());
    for (std::uint32_t id : traj->garment_ids) {
      const int g = s.findGarment(id);
      const Vec3 c = s.garments[static_cast<std::size_t>(g)].centroid();
      r.centroids.push_back(c);
      r.inside.push_back(interiorContains(s.container, c) ? 1 : 0);
    }
    double lo = std::numeric_limits<double>::infinity();
    for (const Vec3& p : s.garments[static_cast<std::size_t>(target_index)].positions) lo = std::min(lo, p.z - radius);
    r.target_min_height = lo;
    traj->records.push_back(std::move(r));
  }
};

/// Deepest penetration of any held particle into the container or another garment.
double heldPenetration(const SceneState& s, double radius) {
  const Attachment& a = *s.attachment;
  const int g = s.findGarment(a.garment_id);
  const std::vector<Aabb> boxes = solidBoxes(s.container);
  double worst = 0.0;
  for (std::uint32_t idx : a.particles) {
    const Vec3& p = s.garments[static_cast<std::size_t>(g)].positions[idx];
    forEachSurfaceContact(s.container, boxes, p, radius,
                          [&](const SurfaceContact& c) { worst = std::max(worst, c.penetration); });
    for (std::size_t o = 0; o < s.garments.size(); ++o) {
      if (static_cast<int>(o) == g) continue;
      for (const Vec3& q : s.garments[o].positions) {
        const double d2 = (p - q).squaredNorm();
        if (d2 < 4.0 * radius * radius) worst = std::max(worst, 2.0 * radius - std::sqrt(d2));
      }
    }
  }
  return worst;
}

/// Moves the gripper in a straight line at `speed`, one simulation step at a time. `stop` is checked
/// after every step; returns false if it ended the move early.
template <typename Stop>
bool moveGripper(SceneState& s, const Vec3& target, double speed, const SimParams& sim, Recorder& rec, Phase phase,
                 Stop&& stop) {
  Attachment& a = *s.attachment;
  const Vec3 delta = target - a.gripper;
  const double dist = delta.norm();
  bool completed = true;
  if (dist > 0.0) {
    const int steps = std::max(1, static_cast<int>(std::ceil(dist / (speed * sim.dt))));
    s.attachment->gripper_velocity = delta / (steps * sim.dt);
    for (int k = 0; k < steps; ++k) {
      step(s, sim);
      rec.record(s, phase);
      if (stop(s)) {
        completed = k + 1 == steps;
        break;
      }
    }
    if (completed) s.attachment->gripper = target;
  }
  s.attachment->gripper_velocity = Vec3{};
  return completed;
}

bool neverStop(const SceneState&) { return false; }

void releaseAndSettle(SceneState& s, const SimParams& sim, const MotionParams& motion, Recorder& rec) {
  s.attachment.reset();
  for (int k = 0; k < motion.release_settle_steps; ++k) {
    if (kineticEnergy(s) < sim.settle_ke_tol) break;
    step(s, sim);
    rec.record(s, Phase::kRelease);
  }
}

}  // namespace

RetrievalResult executeRetrieval(SceneState& state, const RetrievalAction& action, const SimParams& sim,
                                 const ActionThresholds& thresholds, const MotionParams& motion) {
  require(action.speed > 0.0, ErrorCode::kInvalidParameter, "gripper speed must be > 0");
  require(!state.attachment, ErrorCode::kPrecondition, "scene already holds a garment");
  RetrievalResult res;
  Trajectory& t = res.trajectory;
  t.lift_height = action.lift_height;
  t.exit_region = state.container.exit_region;
  for (const auto& g : state.garments) {
    t.garment_ids.push_back(g.garment_id);
    const Vec3 c = g.centroid();
    t.initial_centroids.push_back(c);
    t.initial_inside.push_back(interiorContains(state.container, c) ? 1 : 0);
  }
  std::optional<Attachment> a = grasp(state, action.grasp_point, thresholds.grasp_radius);
  if (!a) {
    t.grasp_miss = true;
    res.outcome = judgeRetrieval(t, thresholds);
    return res;
  }
  t.target_id = a->garment_id;
  state.attachment = std::move(a);
  Recorder rec{&t, sim.contact_radius, state.findGarment(t.target_id)};

  const Vec3 g0 = action.grasp_point;
  moveGripper(state, {g0.x, g0.y, action.lift_height}, action.speed, sim, rec, Phase::kLift, neverStop);
  moveGripper(state, action.exit_waypoint, action.speed, sim, rec, Phase::kTransport, neverStop);
  moveGripper(state, action.drop_point, action.speed, sim, rec, Phase::kTransport, neverStop);
  releaseAndSettle(state, sim, motion, rec);
  res.outcome = judgeRetrieval(t, thresholds);
  return res;
}

bool executePickPlace(SceneState& state, const PickPlaceAction& action, const SimParams& sim,
                      const ActionThresholds& thresholds, const MotionParams& motion) {
  require(action.speed > 0.0, ErrorCode::kInvalidParameter, "gripper speed must be > 0");
  require(action.pick_point.finite() && action.place_point.finite(), ErrorCode::kInvalidParameter,
          "pick and place points must be finite");
  require(!state.attachment, ErrorCode::kPrecondition, "scene already holds a garment");
  std::optional<Attachment> a = grasp(state, action.pick_point, thresholds.grasp_radius);
  if (!a) return false;
  double lowest = 0.0;
  for (const Vec3& o : a->offsets) lowest = std::min(lowest, o.z);
  state.attachment = std::move(a);
  Recorder rec;

  const Vec3 p = action.pick_point, q = action.place_point;
  const double r = sim.contact_radius;
  moveGripper(state, {p.x, p.y, action.lift_height}, action.speed, sim, rec, Phase::kLift, neverStop);
  moveGripper(state, {q.x, q.y, action.lift_height}, action.speed, sim, rec, Phase::kTransport, neverStop);
  // Lower until the lowest held particle would rest on the place point, or it presses into something.
  const double z_end = std::min(action.lift_height, q.z + r - lowest);
  moveGripper(state, {q.x, q.y, z_end}, action.speed, sim, rec, Phase::kTransport,
              [&](const SceneState& s) { return heldPenetration(s, r) > motion.place_stop_depth; });
  releaseAndSettle(state, sim, motion, rec);
  return true;
}

ActionOutcome judgeRetrieval(const Trajectory& t, const ActionThresholds& thresholds) {
  ActionOutcome o;
  o.target_garment_id = t.target_id;
  o.min_target_clearance = std::numeric_limits<double>::infinity();
  if (t.grasp_miss) {
    o.failure_mode = FailureMode::kGraspMiss;
    return o;
  }
  const std::size_t n = t.garment_ids.size();
  std::size_t target = n;
  for (std::size_t g = 0; g < n; ++g) {
    if (t.garment_ids[g] == t.target_id) target = g;
  }
  require(target < n, ErrorCode::kInput, "trajectory does not contain the target garment");

  std::vector<double> max_disp(n, 0.0);
  FailureMode first = FailureMode::kNone;
  bool cleared = false;
  for (const TrajectoryRecord& r : t.records) {
    require(r.centroids.size() == n && r.inside.size() == n, ErrorCode::kInput, "malformed trajectory record");
    bool drag = false;
    for (std::size_t g = 0; g < n; ++g) {
      if (g == target) continue;
      const double d = (r.centroids[g] - t.initial_centroids[g]).norm();
      max_disp[g] = std::max(max_disp[g], d);
      if (d > thresholds.tau_drag || (t.initial_inside[g] && !r.inside[g])) drag = true;
    }
    if (r.phase == Phase::kLift && r.gripper.z >= t.lift_height - 1e-9) cleared = true;
    const bool judged = r.phase == Phase::kTransport || (r.phase == Phase::kLift && cleared);
    if (judged) o.min_target_clearance = std::min(o.min_target_clearance, r.target_min_height);
    const bool floor = judged && r.target_min_height < thresholds.floor_eps;
    if (first == FailureMode::kNone) {
      if (drag) {
        first = FailureMode::kDragOut;
      } else if (floor) {
        first = FailureMode::kFloorContact;
      }
    }
  }
  for (std::size_t g = 0; g < n; ++g) {
    if (g == target) continue;
    o.max_nontarget_displacement = std::max(o.max_nontarget_displacement, max_disp[g]);
    if (max_disp[g] > thresholds.tau_drag) o.displaced_ids.push_back(t.garment_ids[g]);
  }
  if (first == FailureMode::kNone) {
    const bool extracted = !t.records.empty() && t.exit_region.contains(t.records.back().centroids[target]);
    if (!extracted) first = FailureMode::kNotExtracted;
  }
  o.failure_mode = first;
  o.success = first == FailureMode::kNone;
  return o;
}

std::vector<std::uint32_t> removeExtracted(SceneState& state) {
  std::vector<std::uint32_t> removed;
  std::vector<GarmentInstance> kept;
  for (auto& g : state.garments) {
    if (interiorContains(state.container, g.centroid())) {
      kept.push_back(std::move(g));
    } else {
      removed.push_back(g.garment_id);
    }
  }
  state.garments = std::move(kept);
  return removed;
}

int garmentsInContainer(const SceneState& state) {
  int n = 0;
  for (const auto& g : state.garments) n += interiorContains(state.container, g.centroid()) ? 1 : 0;
  return n;
}

std::string Trajectory::toCsv() const {
  std::ostringstream os;
  os.precision(9);
  os << "step,phase,gx,gy,gz";
  for (std::uint32_t id : garment_ids) os << ",c" << id << "x,c" << id << "y,c" << id << "z,in" << id;
  os << '\n';
  for (const TrajectoryRecord& r : records) {
    os << r.step << ',' << static_cast<int>(r.phase) << ',' << r.gripper.x << ',' << r.gripper.y << ',' << r.gripper.z;
    for (std::size_t g = 0; g < r.centroids.size(); ++g) {
      os << ',' << r.centroids[g].x << ',' << r.centroids[g].y << ',' << r.centroids[g].z << ','
         << static_cast<int>(r.inside[g]);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace pileaff
