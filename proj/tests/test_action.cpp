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

#include <gtest/gtest.h>

#include "pileaff/action.hpp"
#include "pileaff/scene.hpp"

namespace pileaff {
namespace {

SceneState scene(ContainerKind kind, std::uint64_t seed, int garments = 2) {
  static const TemplatePool pool = defaultTemplatePool();
  return generateScene(kind, garments, seed, pool.select(Split::kSeen), SimParams{});
}

Vec3 topPoint(const SceneState& s) {
  Vec3 best{0, 0, -1e9};
  for (const auto& g : s.garments) {
    for (const Vec3& p : g.positions) {
      if (p.z > best.z) best = p;
    }
  }
  return best;
}

// Two garments: target index 0, the other at index 1. Records step through lift and transport.
Trajectory syntheticTrajectory() {
  Trajectory t;
  t.target_id = 7;
  t.garment_ids = {7, 8};
  t.initial_centroids = {{0, 0, 0.1}, {0.1, 0, 0.1}};
  t.initial_inside = {1, 1};
  t.lift_height = 0.5;
  t.exit_region = Aabb{{1, -1, 0}, {2, 1, 1}};
  for (int i = 0; i < 4; ++i) {
    TrajectoryRecord r;
    r.step = static_cast<std::uint64_t>(i);
    r.phase = i < 2 ? Phase::kLift : Phase::kTransport;
    r.gripper = {0, 0, i == 0 ? 0.2 : 0.5};
    r.centroids = {{0.4 * i, 0, 0.3}, {0.1, 0, 0.1}};
    r.inside = {1, 1};
    r.target_min_height = 0.2;
    t.records.push_back(r);
  }
  t.records.back().centroids[0] = {1.5, 0, 0.3};
  return t;
}

TEST(Judge, CleanTrajectorySucceeds) {
  const ActionOutcome o = judgeRetrieval(syntheticTrajectory(), ActionThresholds{});
  EXPECT_TRUE(o.success);
  EXPECT_EQ(o.failure_mode, FailureMode::kNone);
  EXPECT_EQ(o.target_garment_id, 7u);
  EXPECT_TRUE(o.displaced_ids.empty());
}

TEST(Judge, GraspMissTakesPrecedence) {
  Trajectory t = syntheticTrajectory();
  t.grasp_miss = true;
  EXPECT_EQ(judgeRetrieval(t, ActionThresholds{}).failure_mode, FailureMode::kGraspMiss);
}

TEST(Judge, DragOutBeatsFloorContactOnSameRecord) {
  Trajectory t = syntheticTrajectory();
  t.records[2].centroids[1] = {0.3, 0, 0.1};
  t.records[2].target_min_height = 0.0;
  const ActionOutcome o = judgeRetrieval(t, ActionThresholds{});
  EXPECT_EQ(o.failure_mode, FailureMode::kDragOut);
  ASSERT_EQ(o.displaced_ids.size(), 1u);
  EXPECT_EQ(o.displaced_ids[0], 8u);
}

TEST(Judge, EarliestFailureWins) {
  Trajectory t = syntheticTrajectory();
  t.records[2].target_min_height = 0.001;
  t.records[3].centroids[1] = {0.3, 0, 0.1};
  EXPECT_EQ(judgeRetrieval(t, ActionThresholds{}).failure_mode, FailureMode::kFloorContact);
}

TEST(Judge, FloorContactIgnoredBeforeLiftClears) {
  Trajectory t = syntheticTrajectory();
  t.records[0].target_min_height = 0.0;
  EXPECT_TRUE(judgeRetrieval(t, ActionThresholds{}).success);
}

TEST(Judge, LeavingContainerCountsAsDrag) {
  Trajectory t = syntheticTrajectory();
  t.records[3].inside[1] = 0;
  EXPECT_EQ(judgeRetrieval(t, ActionThresholds{}).failure_mode, FailureMode::kDragOut);
}

TEST(Judge, NotExtractedWhenTargetStaysOut) {
  Trajectory t = syntheticTrajectory();
  t.records.back().centroids[0] = {0.5, 0, 0.3};
  EXPECT_EQ(judgeRetrieval(t, ActionThresholds{}).failure_mode, FailureMode::kNotExtracted);
}

TEST(Judge, MissingTargetIsInputError) {
  Trajectory t = syntheticTrajectory();
  t.target_id = 99;
  EXPECT_THROW(judgeRetrieval(t, ActionThresholds{}), Error);
}

TEST(Grasp, EmptySpaceMisses) {
  const SceneState s = scene(ContainerKind::kBasket, 3);
  EXPECT_FALSE(grasp(s, {5, 5, 5}, 0.075).has_value());
  SceneState copy = s;
  const auto r = executeRetrieval(copy, makeRetrievalAction(s.container, {5, 5, 5}, MotionParams{}), SimParams{},
                                  ActionThresholds{}, MotionParams{});
  EXPECT_EQ(r.outcome.failure_mode, FailureMode::kGraspMiss);
  EXPECT_FALSE(r.outcome.success);
}

TEST(Grasp, AttachesNearbyParticlesOfOneGarment) {
  const SceneState s = scene(ContainerKind::kBasket, 3);
  const Vec3 top = topPoint(s);
  const auto a = grasp(s, top, 0.075);
  ASSERT_TRUE(a.has_value());
  EXPECT_FALSE(a->particles.empty());
  EXPECT_EQ(a->particles.size(), a->offsets.size());
  const auto& g = s.garments[static_cast<std::size_t>(s.findGarment(a->garment_id))];
  for (std::uint32_t p : a->particles) EXPECT_LE((g.positions[p] - top).norm(), 0.075 + 1e-12);
}

TEST(Retrieval, ActionFollowsScenarioPath) {
  for (ContainerKind k : {ContainerKind::kWashingMachine, ContainerKind::kBasket, ContainerKind::kSofa}) {
    const Container c = makeContainer(k);
    const MotionParams m;
    const RetrievalAction a = makeRetrievalAction(c, {0, 0, 0.1}, m);
    EXPECT_GE(a.lift_height, 0.1) << scenarioName(k);
    EXPECT_TRUE(c.exit_region.contains(a.drop_point)) << scenarioName(k);
    EXPECT_DOUBLE_EQ(a.speed, m.speed);
  }
}

TEST(Retrieval, OutcomeIsConsistentAndDeterministic) {
  const SceneState s = scene(ContainerKind::kBasket, 17);
  const RetrievalAction a = makeRetrievalAction(s.container, topPoint(s), MotionParams{});
  SceneState x = s, y = s;
  const auto rx = executeRetrieval(x, a, SimParams{}, ActionThresholds{}, MotionParams{});
  const auto ry = executeRetrieval(y, a, SimParams{}, ActionThresholds{}, MotionParams{});
  EXPECT_TRUE(bitIdentical(x, y));
  EXPECT_EQ(rx.outcome.success, ry.outcome.success);
  EXPECT_EQ(rx.outcome.success, rx.outcome.failure_mode == FailureMode::kNone);
  // The judge is a pure function of the trajectory.
  const ActionOutcome again = judgeRetrieval(rx.trajectory, ActionThresholds{});
  EXPECT_EQ(again.failure_mode, rx.outcome.failure_mode);
  EXPECT_FALSE(x.attachment.has_value());
  if (rx.outcome.success) {
    const auto removed = removeExtracted(x);
    ASSERT_EQ(removed.size(), 1u);
    EXPECT_EQ(removed[0], rx.outcome.target_garment_id);
    EXPECT_EQ(garmentsInContainer(x), 1);
  }
}

TEST(PickPlace, MissLeavesStateUntouched) {
  const SceneState s = scene(ContainerKind::kSofa, 5);
  SceneState c = s;
  EXPECT_FALSE(executePickPlace(c, makePickPlaceAction({5, 5, 5}, {0, 0, 0.5}, MotionParams{}), SimParams{},
                                ActionThresholds{}, MotionParams{}));
  EXPECT_TRUE(bitIdentical(s, c));
}

TEST(PickPlace, LiftGrowsWithTravel) {
  const MotionParams m;
  const auto near = makePickPlaceAction({0, 0, 0.1}, {0, 0, 0.1}, m);
  const auto far = makePickPlaceAction({0, 0, 0.1}, {0.4, 0, 0.1}, m);
  EXPECT_NEAR(near.lift_height, 0.1 + m.adapt_clearance, 1e-12);
  EXPECT_NEAR(far.lift_height - near.lift_height, 0.4 * m.adapt_lift_slope, 1e-12);
}

TEST(PickPlace, MovesGarmentAndKeepsItInside) {
  const SceneState s = scene(ContainerKind::kBasket, 6);
  SceneState c = s;
  const Vec3 pick = topPoint(s);
  const Vec3 place{-pick.x * 0.5, -pick.y * 0.5, s.container.floor_height};
  ASSERT_TRUE(executePickPlace(c, makePickPlaceAction(pick, place, MotionParams{}), SimParams{}, ActionThresholds{},
                               MotionParams{}));
  EXPECT_FALSE(c.attachment.has_value());
  EXPECT_FALSE(bitIdentical(s, c));
  EXPECT_EQ(garmentsInContainer(c), 2);
}

TEST(Names, FailureModes) {
  EXPECT_STREQ(failureModeName(FailureMode::kDragOut), "DragOut");
  EXPECT_STREQ(failureModeName(FailureMode::kNone), "None");
}

}  // namespace
}  // namespace pileaff
