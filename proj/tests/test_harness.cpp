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

#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "pileaff/bytes.hpp"
#include "pileaff/harness.hpp"

namespace pileaff {
namespace {

const TemplatePool& pool() {
  static const TemplatePool p = defaultTemplatePool();
  return p;
}

std::string tempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("pileaff_test_" + name)).string();
}

TEST(Config, DefaultsRoundTripThroughJson) {
  const RunConfig a;
  const RunConfig b = parseRunConfig(runConfigJson(a));
  EXPECT_EQ(a.canonicalJson(), b.canonicalJson());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, HashIgnoresOutputDirOnly) {
  RunConfig a, b;
  b.output_dir = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  applyOverride(b, "policy.max_adapt_rounds=2");
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(b.policy.max_adapt_rounds, 2);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parseRunConfig("{\"nope\": 1}"), Error);
  EXPECT_THROW(parseRunConfig("{\"policy\": {\"gate\": 1}}"), Error);
  EXPECT_THROW(parseRunConfig("{not json"), Error);
  EXPECT_THROW(parseRunConfig("{\"seed\": \"abc\"}"), Error);
  RunConfig c;
  EXPECT_THROW(applyOverride(c, "novalue"), Error);
  EXPECT_THROW(applyOverride(c, "env.bogus=3"), Error);
  try {
    parseRunConfig("{\"scenarios\": [\"attic\"]}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Config, PartialFileKeepsDefaults) {
  const RunConfig c = parseRunConfig(R"({"seed": 9, "scenarios": ["basket"], "env": {"num_points": 256}})");
  EXPECT_EQ(c.seed, 9u);
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0], ContainerKind::kBasket);
  EXPECT_EQ(c.env.num_points, 256);
  EXPECT_EQ(c.policy.max_adapt_rounds, 3);
}

TEST(Config, StringOverrideAndValidation) {
  RunConfig c;
  applyOverride(c, "output_dir=some/dir");
  EXPECT_EQ(c.output_dir, "some/dir");
  applyOverride(c, "collect.label_statistic=mean_affordance");
  EXPECT_EQ(c.collect.statistic, LabelStatistic::kMeanAffordance);
  EXPECT_THROW(applyOverride(c, "collect.label_statistic=median"), Error);
  EXPECT_THROW(applyOverride(c, "policy.p_high_gate=2.0"), Error);
  c.policy.p_high_gate = 2.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Methods, NamesAndPolicies) {
  for (int i = 0; i <= static_cast<int>(Method::kHighestPoint); ++i) {
    const auto m = static_cast<Method>(i);
    EXPECT_EQ(parseMethod(methodName(m)), m);
  }
  const PolicyConfig base;
  EXPECT_EQ(policyFor(Method::kNoAdaptation, base).max_adapt_rounds, 0);
  EXPECT_EQ(policyFor(Method::kNoPickAfford, base).pick, Chooser::kRandom);
  EXPECT_EQ(policyFor(Method::kNoPickAfford, base).place, Chooser::kLearned);
  EXPECT_EQ(policyFor(Method::kNoPlaceAfford, base).place, Chooser::kRandom);
  EXPECT_EQ(policyFor(Method::kRandomPoint, base).retrieve, Chooser::kRandom);
  EXPECT_EQ(policyFor(Method::kHighestPoint, base).retrieve, Chooser::kHighest);
  EXPECT_THROW(parseMethod("ours"), Error);
}

TEST(Eval, ZeroScenesIsConfigError) {
  SceneCache cache(EnvConfig{}, pool());
  try {
    evaluate({}, cache, {ContainerKind::kBasket}, 0, 1, Split::kSeen, Method::kHighestPoint, PolicyConfig{}, "h");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Eval, DeterministicReportWithConsistentCounts) {
  SceneCache cache(EnvConfig{}, pool());
  const auto run = [&] {
    return evaluate({}, cache, {ContainerKind::kBasket, ContainerKind::kSofa}, 2, 77, Split::kSeen,
                    Method::kRandomPoint, PolicyConfig{}, "cafe");
  };
  const EvalReport a = run();
  const EvalReport b = run();
  EXPECT_EQ(a.toCsv(), b.toCsv());
  ASSERT_EQ(a.scenarios.size(), 2u);
  for (const ScenarioStats& s : a.scenarios) {
    EXPECT_EQ(s.scenes, 2);
    int fails = 0;
    for (int f : s.failures) fails += f;
    EXPECT_EQ(s.successes + fails, s.attempts);
    EXPECT_GE(s.successRate(), 0.0);
    EXPECT_LE(s.successRate(), 1.0);
  }
  EXPECT_EQ(a.pooled().attempts, a.scenarios[0].attempts + a.scenarios[1].attempts);
  const std::string csv = a.toCsv();
  EXPECT_NE(csv.find("cafe"), std::string::npos);
  EXPECT_NE(csv.find("attempt"), std::string::npos);
  EXPECT_NE(csv.find("\nrandom-point,seen,all,"), std::string::npos);
}

TEST(Eval, SceneStreamsDifferBySplitAndSeed) {
  SceneCache cache(EnvConfig{}, pool());
  const auto a = evalScenes(cache, ContainerKind::kBasket, Split::kSeen, 3, 1);
  const auto b = evalScenes(cache, ContainerKind::kBasket, Split::kSeen, 3, 1);
  const auto c = evalScenes(cache, ContainerKind::kBasket, Split::kSeen, 3, 2);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].scene_seed, b[i].scene_seed);
    EXPECT_NE(a[i].scene_seed, c[i].scene_seed);
  }
}

TEST(Oracle, MatchesDirectExecutionAndLeavesSceneAlone) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kBasket, Split::kSeen, 40);
  const std::string before = snapshot(s);
  const PointCloudObs obs = observe(env, s);
  const std::vector<int> cands{0, 100, 200, 300};
  const auto ok = bruteForceOracle(s, env, obs, cands);
  EXPECT_EQ(snapshot(s), before);
  for (int c : cands) {
    SceneState w = s;
    const auto r = executeRetrieval(w, makeRetrievalAction(w.container, obs.points[static_cast<std::size_t>(c)], env.motion),
                                    env.sim, env.thresholds, env.motion);
    EXPECT_EQ(r.outcome.success, std::find(ok.begin(), ok.end(), c) != ok.end()) << c;
  }
}

TEST(Oracle, EmptySpaceCandidatesAllMiss) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kBasket, Split::kSeen, 40);
  PointCloudObs far;
  far.points = {{3, 3, 3}, {-3, 2, 1}};
  EXPECT_TRUE(bruteForceOracle(s, env, far, {0, 1}).empty());
  EXPECT_THROW(bruteForceOracle(s, env, far, std::vector<int>(65, 0)), Error);
  EXPECT_THROW(bruteForceOracle(s, env, far, {2}), Error);
}

TEST(Ply, RoundTripsAtFloatPrecision) {
  Cloud pts;
  std::vector<double> scores;
  Rng rng(1);
  for (int i = 0; i < 512; ++i) {
    pts.push_back({uniform01(rng), uniform01(rng) - 0.5, uniform01(rng) * 0.3});
    scores.push_back(uniform01(rng));
  }
  const std::string path = tempPath("roundtrip.ply");
  exportAffordance(path, pts, scores, "abc123", 7);
  const AffordancePly r = readAffordancePly(path);
  ASSERT_EQ(r.points.size(), 512u);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(static_cast<float>(r.points[i].x), static_cast<float>(pts[i].x));
    EXPECT_EQ(static_cast<float>(r.scores[i]), static_cast<float>(scores[i]));
  }
  const std::string text = readFile(path);
  EXPECT_NE(text.find("element vertex 512"), std::string::npos);
  EXPECT_NE(text.find("property float affordance"), std::string::npos);
  EXPECT_NE(text.find("abc123"), std::string::npos);
  std::remove(path.c_str());
}

TEST(Ply, MismatchedLengthsRejected) {
  EXPECT_THROW(exportAffordance(tempPath("bad.ply"), Cloud(3), {0.1, 0.2}), Error);
}

TEST(Splits, DisjointAndParsed) {
  EXPECT_TRUE(splitsDisjoint(pool()));
  EXPECT_THROW(parseSplit("unseen-everything"), Error);
}

}  // namespace
}  // namespace pileaff
