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

#include "pileaff/garment.hpp"
#include "pileaff/scene.hpp"

namespace pileaff {
namespace {

TEST(Garment, SpringCountsOnGrid) {
  const GarmentTemplate t = makeTemplate(Category::kTop, 4, 5, 0.05);
  EXPECT_EQ(t.particleCount(), 20);
  EXPECT_EQ(t.countSprings(SpringKind::kStructural), 4u * 4 + 3u * 5);
  EXPECT_EQ(t.countSprings(SpringKind::kShear), 2u * 3 * 4);
  EXPECT_EQ(t.countSprings(SpringKind::kBend), 4u * 3 + 2u * 5);
  for (const Spring& s : t.springs) EXPECT_GT(s.rest, 0.0);
}

TEST(Garment, RejectsDegenerateDimensions) {
  EXPECT_THROW(makeTemplate(Category::kTop, 0, 5, 0.05), Error);
  EXPECT_THROW(makeTemplate(Category::kTop, 3, 3, 0.0), Error);
}

TEST(Garment, RestGridIsCenteredAndSpaced) {
  const GarmentTemplate t = makeTemplate(Category::kScarf, 2, 8, 0.05);
  const auto g = restGrid(t);
  ASSERT_EQ(g.size(), 16u);
  Vec3 c{};
  for (const Vec3& p : g) c = c + p;
  EXPECT_NEAR(c.x, 0.0, 1e-12);
  EXPECT_NEAR(c.y, 0.0, 1e-12);
  EXPECT_NEAR((g[static_cast<std::size_t>(t.index(0, 1))] - g[0]).norm(), 0.05, 1e-12);
}

TEST(Garment, FoldStacksOneSpacingAbove) {
  const GarmentTemplate t = makeTemplate(Category::kTop, 4, 4, 0.05);
  const auto g = restGrid(t, {Fold{true, 1}});
  double zmax = 0.0;
  for (const Vec3& p : g) zmax = std::max(zmax, p.z);
  EXPECT_NEAR(zmax, 0.05, 1e-9);
}

TEST(Garment, InstantiateIsPure) {
  auto t = std::make_shared<const GarmentTemplate>(makeTemplate(Category::kDress, 5, 4, 0.05));
  const Pose pose = Pose::fromYawPitchRoll(0.3, 0.1, -0.2, {0.1, 0.0, 0.4});
  const auto a = instantiate(t, pose, 0.01, 42, 3);
  const auto b = instantiate(t, pose, 0.01, 42, 3);
  const auto c = instantiate(t, pose, 0.01, 43, 3);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_NE(a.positions, c.positions);
  EXPECT_EQ(a.garment_id, 3u);
  for (const Vec3& v : a.velocities) EXPECT_EQ(v, Vec3{});
}

TEST(Garment, PoseRotationIsOrthonormal) {
  const Pose p = Pose::fromYawPitchRoll(0.7, -0.4, 1.1, {});
  const Vec3 x = p.apply({1, 0, 0}), y = p.apply({0, 1, 0}), z = p.apply({0, 0, 1});
  EXPECT_NEAR(x.norm(), 1.0, 1e-12);
  EXPECT_NEAR(x.dot(y), 0.0, 1e-12);
  EXPECT_NEAR((x.cross(y) - z).squaredNorm(), 0.0, 1e-12);
}

TEST(TemplatePool, SplitsAreDisjoint) {
  const TemplatePool pool = defaultTemplatePool();
  std::set<std::string> seen;
  for (const auto& t : pool.select(Split::kSeen)) seen.insert(t->template_id);
  ASSERT_FALSE(seen.empty());
  for (Split s : {Split::kNovelShape, Split::kNovelCategory}) {
    const auto sel = pool.select(s);
    ASSERT_FALSE(sel.empty());
    for (const auto& t : sel) EXPECT_EQ(seen.count(t->template_id), 0u) << t->template_id;
  }
  for (const auto& t : pool.select(Split::kNovelCategory)) {
    EXPECT_TRUE(t->category == Category::kScarf || t->category == Category::kHat);
  }
}

TEST(TemplatePool, NameRoundTrips) {
  for (int i = 0; i < kNumCategories; ++i) {
    const auto c = static_cast<Category>(i);
    EXPECT_EQ(parseCategory(categoryName(c)), c);
  }
  for (Split s : {Split::kSeen, Split::kNovelShape, Split::kNovelCategory}) EXPECT_EQ(parseSplit(splitName(s)), s);
  EXPECT_THROW(parseSplit("bogus"), Error);
}

}  // namespace
}  // namespace pileaff
