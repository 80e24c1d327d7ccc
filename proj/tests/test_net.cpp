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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pileaff/net.hpp"

namespace pileaff {
namespace {

std::vector<Vec3> randomCloud(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<Vec3> c(static_cast<std::size_t>(n));
  for (auto& p : c) p = {u(rng), u(rng), 0.5 * u(rng)};
  return c;
}

TrainGroup makeGroup(const std::vector<Vec3>& cloud, std::uint64_t seed, int pick_index = -1) {
  Rng rng(seed);
  TrainGroup g;
  g.cloud = &cloud;
  g.pick_index = pick_index;
  for (int i = 0; i < 6; ++i) {
    g.queries.push_back(cloud[uniformIndex(rng, cloud.size())] + Vec3{0.01, -0.01, 0.005});
    g.labels.push_back(static_cast<int>(rng() % 2));
  }
  return g;
}

// Central differences on every tensor of a tiny f64 model.
void checkGradient(ModuleKind kind) {
  const auto cloud = randomCloud(32, 7);
  const auto cloud2 = randomCloud(32, 8);
  ModelD model(kind, ModelArch::tiny(kind, 32), 3);
  // Small positive biases keep most rectifiers active so the check sees real paths.
  for (const auto& t : model.tensors()) {
    if (t.cols == 1) {
      for (std::size_t i = 0; i < t.size(); ++i) model.params()[t.offset + i] = 0.05;
    }
  }
  const int pick = kind == ModuleKind::kPlace ? 5 : -1;
  std::vector<TrainGroup> batch{makeGroup(cloud, 1, pick), makeGroup(cloud2, 2, pick)};
  std::vector<double> grad;
  lossAndGradient(model, batch, grad);
  const double h = 1e-5;
  for (const auto& t : model.tensors()) {
    double num2 = 0.0, diff2 = 0.0, ana2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double& p = model.params()[t.offset + i];
      const double orig = p;
      std::vector<double> dummy;
      p = orig + h;
      const double lp = lossAndGradient(model, batch, dummy);
      p = orig - h;
      const double lm = lossAndGradient(model, batch, dummy);
      p = orig;
      const double num = (lp - lm) / (2 * h);
      const double ana = grad[t.offset + i];
      num2 += num * num;
      ana2 += ana * ana;
      diff2 += (num - ana) * (num - ana);
    }
    const double denom = std::max({std::sqrt(num2), std::sqrt(ana2), 1e-8});
    EXPECT_LT(std::sqrt(diff2) / denom, 1e-4) << moduleName(kind) << " tensor " << t.name;
  }
}

TEST(NetTest, GradientRetrieve) { checkGradient(ModuleKind::kRetrieve); }
TEST(NetTest, GradientPlace) { checkGradient(ModuleKind::kPlace); }
TEST(NetTest, GradientPick) { checkGradient(ModuleKind::kPick); }

TEST(NetTest, BceClamp) {
  EXPECT_NEAR(bce(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce(1.0, 1), -std::log(1.0 - kBceEps), 1e-12);
  EXPECT_NEAR(bce(0.0, 1), -std::log(kBceEps), 1e-9);
  EXPECT_THROW(bce(0.5, 2), Error);
}

TEST(NetTest, ScoresInUnitIntervalAndDeterministic) {
  const auto cloud = randomCloud(512, 11);
  ModelF model(ModuleKind::kRetrieve, ModelArch::defaults(ModuleKind::kRetrieve), 5);
  const auto a = model.score(cloud, cloud);
  const auto b = model.score(cloud, cloud);
  ASSERT_EQ(a.size(), cloud.size());
  EXPECT_EQ(a, b);
  for (double s : a) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(NetTest, PermutationInvariantInput) {
  auto cloud = randomCloud(512, 12);
  ModelF model(ModuleKind::kPick, ModelArch::defaults(ModuleKind::kPick), 5);
  const std::vector<Vec3> q(cloud.begin(), cloud.begin() + 10);
  const auto a = model.score(cloud, q);
  std::reverse(cloud.begin(), cloud.end());
  const auto b = model.score(cloud, q);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(NetTest, PlaceHeadWidth) {
  const auto layout = ModelF::layout(ModuleKind::kPlace, ModelArch::defaults(ModuleKind::kPlace));
  bool found = false;
  for (const auto& t : layout) {
    if (t.name == "head.0.W") {
      EXPECT_EQ(t.cols, 256);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(NetTest, DuplicatedBatchSameGradient) {
  const auto cloud = randomCloud(32, 9);
  ModelD model(ModuleKind::kRetrieve, ModelArch::tiny(ModuleKind::kRetrieve, 32), 4);
  std::vector<TrainGroup> batch{makeGroup(cloud, 3)};
  std::vector<double> g1, g2;
  const double l1 = lossAndGradient(model, batch, g1);
  batch.push_back(batch[0]);
  const double l2 = lossAndGradient(model, batch, g2);
  EXPECT_NEAR(l1, l2, 1e-12);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(NetTest, SaturatedBatchHasTinyGradient) {
  const auto cloud = randomCloud(32, 10);
  ModelD model(ModuleKind::kRetrieve, ModelArch::tiny(ModuleKind::kRetrieve, 32), 4);
  for (auto& t : model.tensors()) {
    if (t.name == "head.out.b") model.params()[t.offset] = 40.0;
  }
  TrainGroup g = makeGroup(cloud, 3);
  for (auto& l : g.labels) l = 1;
  std::vector<double> grad;
  lossAndGradient(model, {g}, grad);
  double n2 = 0.0;
  for (double v : grad) n2 += v * v;
  EXPECT_LT(std::sqrt(n2), 1e-4);
}

TEST(NetTest, AdamZeroGradientAndDeterminism) {
  std::vector<double> p{1.0, -2.0}, z{0.0, 0.0};
  AdamState st;
  adamUpdate(p, z, st, AdamParams{});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  std::vector<double> a{1.0}, b{1.0}, g{0.5};
  AdamState sa, sb;
  adamUpdate(a, g, sa, AdamParams{});
  adamUpdate(b, g, sb, AdamParams{});
  EXPECT_EQ(a, b);
}

TEST(NetTest, AdamQuadraticDecreases) {
  std::vector<double> x{2.0};
  AdamState st;
  double prev = x[0] * x[0];
  for (int i = 0; i < 10; ++i) {
    std::vector<double> g{2.0 * x[0]};
    adamUpdate(x, g, st, AdamParams{});
    const double l = x[0] * x[0];
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(NetTest, CheckpointRoundTrip) {
  ModelF model(ModuleKind::kPlace, ModelArch::defaults(ModuleKind::kPlace), 21);
  const std::string blob = saveCheckpoint(model, {"abc123", 21});
  CheckpointMeta meta;
  const ModelF back = loadCheckpoint(blob, &meta);
  EXPECT_EQ(meta.config_hash, "abc123");
  EXPECT_EQ(meta.seed, 21u);
  EXPECT_EQ(back.kind(), ModuleKind::kPlace);
  EXPECT_EQ(back.params(), model.params());
  EXPECT_THROW(loadCheckpoint(blob.substr(0, blob.size() - 3)), Error);
  std::string bad = blob;
  bad[0] = 'X';
  EXPECT_THROW(loadCheckpoint(bad), Error);
}

TEST(NetTest, WrongPointCountRejected) {
  ModelF model(ModuleKind::kPick, ModelArch::defaults(ModuleKind::kPick), 1);
  const auto cloud = randomCloud(100, 1);
  EXPECT_THROW(model.score(cloud, cloud), Error);
}

}  // namespace
}  // namespace pileaff
