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

#include "pileaff/policy.hpp"

namespace pileaff {
namespace {

const TemplatePool& pool() {
  static const TemplatePool p = defaultTemplatePool();
  return p;
}

TEST(Gate, PHighExamples) {
  EXPECT_DOUBLE_EQ(pHigh({0.95, 0.5, 0.91, 0.2}, 0.9), 0.5);
  EXPECT_DOUBLE_EQ(pHigh({0.9, 0.9, 0.9}, 0.9), 0.0);  // strictly above
  EXPECT_DOUBLE_EQ(pHigh({1.0}, 0.9), 1.0);
  EXPECT_THROW(pHigh({}, 0.9), Error);
}

TEST(Gate, DecisionBoundaryIsStrict) {
  const PolicyConfig cfg;
  std::vector<double> map(10, 0.0);
  map[0] = 0.95;  // P_high = 0.1 exactly: not above the gate
  EXPECT_EQ(decide(map, cfg), Decision::kAdapt);
  map[1] = 0.95;  // 0.2
  EXPECT_EQ(decide(map, cfg), Decision::kRetrieve);
  std::vector<double> big(1000, 0.0);
  for (int i = 0; i < 101; ++i) big[static_cast<std::size_t>(i)] = 0.9000001;
  EXPECT_EQ(decide(big, cfg), Decision::kRetrieve);
  big[100] = 0.9;
  EXPECT_EQ(decide(big, cfg), Decision::kAdapt);
}

TEST(Gate, ConfigValidation) {
  PolicyConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_adapt_rounds = -1;
  EXPECT_THROW(c.validate(), Error);
  c = PolicyConfig{};
  c.p_high_gate = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Choice, ArgmaxAndHighestTieBreak) {
  EXPECT_EQ(argmaxIndex({0.1, 0.7, 0.7, 0.2}), 1u);
  EXPECT_EQ(highestIndex({{0, 0, 0.2}, {1, 0, 0.5}, {2, 0, 0.5}}), 1u);
  EXPECT_THROW(argmaxIndex({}), Error);
}

TEST(Choice, ChooserNames) {
  for (Chooser c : {Chooser::kLearned, Chooser::kRandom, Chooser::kHighest}) EXPECT_EQ(parseChooser(chooserName(c)), c);
  EXPECT_THROW(parseChooser("nope"), Error);
}

TEST(Log, RoundsCountedPerRetrieval) {
  EpisodeLog log;
  auto push = [&](StepKind k) {
    StepRecord r;
    r.kind = k;
    log.steps.push_back(r);
  };
  push(StepKind::kAdapt), push(StepKind::kAdapt), push(StepKind::kRetrieve);
  push(StepKind::kAdapt), push(StepKind::kAdapt), push(StepKind::kAdapt), push(StepKind::kRetrieve);
  EXPECT_EQ(log.adaptations(), 5);
  EXPECT_EQ(log.maxRoundsPerRetrieval(), 3);
  const std::string text = log.toText();
  EXPECT_NE(text.find("decision=adapt"), std::string::npos);
  EXPECT_NE(text.find("decision=retrieve"), std::string::npos);
}

TEST(Episode, HighestPointBaselineNeverAdapts) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kBasket, Split::kSeen, 12);
  PolicyConfig pc;
  pc.retrieve = Chooser::kHighest;
  const EpisodeLog log = runEpisode({}, s, env, pc, 12);
  EXPECT_EQ(log.adaptations(), 0);
  EXPECT_GT(log.attempts, 0);
  EXPECT_LE(static_cast<int>(log.steps.size()), log.initial_garments * 4 + 5);
  int fails = 0;
  for (int f : log.failures) fails += f;
  EXPECT_EQ(log.successes + fails, log.attempts);
  EXPECT_EQ(log.remaining + static_cast<int>(log.removed_ids.size()), log.initial_garments);
}

TEST(Episode, RandomAdaptationRespectsRoundCap) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kSofa, Split::kSeen, 3);
  // Untrained tiny model: scores sit near 0.5 so the gate stays closed and every round is used.
  const ModelF retrieve(ModuleKind::kRetrieve, ModelArch::tiny(ModuleKind::kRetrieve, env.num_points), 1);
  PolicyConfig pc;
  pc.pick = pc.place = Chooser::kRandom;
  pc.max_adapt_rounds = 2;
  const EpisodeLog log = runEpisode({&retrieve, nullptr, nullptr}, s, env, pc, 3);
  EXPECT_LE(log.maxRoundsPerRetrieval(), 2);
  bool forced = false;
  for (const StepRecord& r : log.steps) {
    if (r.kind == StepKind::kRetrieve && r.forced) forced = true;
    if (r.kind == StepKind::kAdapt) {
      EXPECT_GE(r.round, 1);
      EXPECT_LE(r.round, 2);
    }
  }
  EXPECT_TRUE(forced);
  // Same inputs, same log.
  EXPECT_EQ(runEpisode({&retrieve, nullptr, nullptr}, s, env, pc, 3).toText(), log.toText());
}

TEST(Episode, LearnedPolicyNeedsModels) {
  const EnvConfig env;
  const SceneState s = makeScene(env, pool(), ContainerKind::kBasket, Split::kSeen, 12);
  EXPECT_THROW(runEpisode({}, s, env, PolicyConfig{}, 12), Error);
}

}  // namespace
}  // namespace pileaff
