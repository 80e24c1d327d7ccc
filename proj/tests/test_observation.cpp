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

#include <set>

#include <gtest/gtest.h>

#include "pileaff/env.hpp"

namespace pileaff {
namespace {

const TemplatePool& pool() {
  static const TemplatePool p = defaultTemplatePool();
  return p;
}

TEST(Fps, StartsAtSeedAndCoversExtremes) {
  const std::vector<Vec3> pts{{0, 0, 0}, {0.1, 0, 0}, {1, 0, 0}, {0.5, 0, 0}, {0.9, 0, 0}};
  const auto idx = farthestPointSample(pts, 3, 0);
  ASSERT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx[0], 0u);
  EXPECT_EQ(idx[1], 2u);
  EXPECT_EQ(idx[2], 3u);
}

TEST(Fps, TiesGoToLowestIndex) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}};
  EXPECT_EQ(farthestPointSample(pts, 2, 0)[1], 1u);
}

TEST(Fps, IndicesAreDistinct) {
  std::vector<Vec3> pts;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) pts.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
  const auto idx = farthestPointSample(pts, 50, 7);
  EXPECT_EQ(std::set<std::uint32_t>(idx.begin(), idx.end()).size(), 50u);
  EXPECT_EQ(idx[0], 7u);
}

TEST(Render, FixedSizeWithProvenanceOnSurface) {
  const EnvConfig env;
  for (ContainerKind k : {ContainerKind::kWashingMachine, ContainerKind::kBasket, ContainerKind::kSofa}) {
    const SceneState s = makeScene(env, pool(), k, Split::kSeen, 31);
    const PointCloudObs obs = observe(env, s);
    ASSERT_EQ(obs.size(), static_cast<std::size_t>(env.num_points)) << scenarioName(k);
    ASSERT_EQ(obs.provenance.size(), obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const int g = s.findGarment(obs.provenance[i].garment_id);
      ASSERT_GE(g, 0);
      const Vec3 p = s.garments[static_cast<std::size_t>(g)].positions[obs.provenance[i].particle];
      // A hit lies on the particle's sphere.
      EXPECT_NEAR((obs.points[i] - p).norm(), env.sim.contact_radius, 1e-6);
    }
  }
}

TEST(Render, DeterministicAndTracksScene) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kBasket, Split::kSeen, 4);
  const PointCloudObs a = observe(env, s), b = observe(env, s);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.scene_ref, b.scene_ref);
  const SceneState t = makeScene(env, pool(), ContainerKind::kBasket, Split::kSeen, 5);
  EXPECT_NE(observe(env, t).scene_ref, a.scene_ref);
}

TEST(Render, EmptySceneThrows) {
  SceneState s;
  s.container = makeContainer(ContainerKind::kBasket);
  try {
    renderCloud(s, defaultCamera(ContainerKind::kBasket), 512, 0.025);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyObservation);
  }
}

TEST(Render, CameraValidation) {
  CameraPose c = defaultCamera(ContainerKind::kSofa);
  EXPECT_NO_THROW(c.validate());
  c.width = 0;
  EXPECT_THROW(c.validate(), Error);
  c = defaultCamera(ContainerKind::kSofa);
  c.look_at = c.position;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Lattice, CountsAndSupport) {
  const std::size_t expected[] = {56, 80, 209};
  for (int k = 0; k < kNumScenarios; ++k) {
    const Container c = makeContainer(static_cast<ContainerKind>(k));
    const auto lat = supportLattice(c, 0.05);
    EXPECT_EQ(lat.size(), expected[k]) << scenarioName(c.kind);
    for (const Vec3& p : lat) EXPECT_NEAR(p.z, supportHeight(c, p.x, p.y), 1e-9);
  }
  EXPECT_THROW(supportLattice(makeContainer(ContainerKind::kBasket), 0.0), Error);
}

TEST(Lattice, PlaceCandidatesAppendLattice) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kSofa, Split::kSeen, 2);
  const PointCloudObs obs = observe(env, s);
  const auto cands = placeCandidates(env, ContainerKind::kSofa, obs.points);
  ASSERT_EQ(cands.size(), obs.size() + 209);
  for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_EQ(cands[i], obs.points[i]);
}

}  // namespace
}  // namespace pileaff
