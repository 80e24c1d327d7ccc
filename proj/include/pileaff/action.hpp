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
#include <optional>
#include <string>
#include <vector>

#include "pileaff/sim.hpp"

namespace pileaff {

enum class FailureMode : std::uint8_t { kNone = 0, kGraspMiss, kFloorContact, kDragOut, kNotExtracted };
inline constexpr int kNumFailureModes = 5;

const char* failureModeName(FailureMode m);

struct ActionThresholds {
  double grasp_radius = 0.075;  // m, 1.5x the template spacing
  double tau_drag = 0.05;       // m
  double floor_eps = 0.01;      // m, measured from the bottom of a particle sphere
};

/// Gripper motion settings shared by both primitives.
struct MotionParams {
  double speed = 0.5;              // m/s
  double lift_factor = 1.2;        // retrieval lift height = lift_factor * referenceHeight
  double adapt_clearance = 0.1;    // m above the higher of pick and place
  double adapt_lift_slope = 0.5;   // extra lift per meter of horizontal travel
  double place_stop_depth = 0.004; // m; lowering stops once a held particle presses this deep
  int release_settle_steps = 1500; // cap on settling after release
};

struct RetrievalAction {
  Vec3 grasp_point;
  double lift_height = 0.0;
  Vec3 exit_waypoint;
  Vec3 drop_point;
  double speed = 0.5;
};

struct PickPlaceAction {
  Vec3 pick_point;
  Vec3 place_point;
  double lift_height = 0.0;
  double speed = 0.5;
};

struct ActionOutcome {
  bool success = false;
  FailureMode failure_mode = FailureMode::kGraspMiss;
  std::uint32_t target_garment_id = 0;
  std::vector<std::uint32_t> displaced_ids;
  double max_nontarget_displacement = 0.0;
  double min_target_clearance = 0.0;
};

/// Nearest particle's garment, and all its particles within grasp_radius; nullopt is a grasp miss.
std::optional<Attachment> grasp(const SceneState& state, const Vec3& point, double grasp_radius);

double retrievalLiftHeight(const Container& c, const MotionParams& motion);
Vec3 exitWaypoint(const Container& c, double lift_height);
Vec3 dropPoint(const Container& c, double lift_height);

/// Scenario path through the exit waypoint; lifts at least a little above the grasp point.
RetrievalAction makeRetrievalAction(const Container& c, const Vec3& grasp_point, const MotionParams& motion);
/// Lift height grows with the horizontal travel so that a same-point pick-place barely moves cloth.
PickPlaceAction makePickPlaceAction(const Vec3& pick, const Vec3& place, const MotionParams& motion);

enum class Phase : std::uint8_t { kLift = 0, kTransport = 1, kRelease = 2 };

struct TrajectoryRecord {
  std::uint64_t step = 0;
  Phase phase = Phase::kLift;
  Vec3 gripper;
  std::vector<Vec3> centroids;  // per garment, in Trajectory::garment_ids order
  std::vector<char> inside;     // centroid inside the container interior
  double target_min_height = 0.0;  // lowest target particle bottom above the floor
};

struct Trajectory {
  bool grasp_miss = false;
  std::uint32_t target_id = 0;
  std::vector<std::uint32_t> garment_ids;
  std::vector<Vec3> initial_centroids;
  std::vector<char> initial_inside;
  double lift_height = 0.0;
  Aabb exit_region;
  std::vector<TrajectoryRecord> records;

  /// One CSV line per record: step, phase, gripper xyz, then per garment cx, cy, cz, inside.
  std::string toCsv() const;
};

struct RetrievalResult {
  ActionOutcome outcome;
  Trajectory trajectory;
};

/// Descend, grasp, lift, transport through the exit waypoint, release at the drop point and settle.
/// Judged from the trajectory alone.
RetrievalResult executeRetrieval(SceneState& state, const RetrievalAction& action, const SimParams& sim,
                                 const ActionThresholds& thresholds, const MotionParams& motion);

/// Returns false on a grasp miss, in which case the state is not touched.
bool executePickPlace(SceneState& state, const PickPlaceAction& action, const SimParams& sim,
                      const ActionThresholds& thresholds, const MotionParams& motion);

/// Pure function of the log. Precedence: GraspMiss, then the earliest of DragOut / FloorContact
/// (DragOut on the same record), then NotExtracted.
ActionOutcome judgeRetrieval(const Trajectory& trajectory, const ActionThresholds& thresholds);

/// Removes garments whose centroid left the container interior; returns their ids.
std::vector<std::uint32_t> removeExtracted(SceneState& state);

/// Number of garments whose centroid lies in the container interior.
int garmentsInContainer(const SceneState& state);

}  // namespace pileaff
