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

#include "pileaff/policy.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace pileaff {

const char* chooserName(Chooser c) {
  switch (c) {
    case Chooser::kLearned: return "learned";
    case Chooser::kRandom: return "random";
    case Chooser::kHighest: return "highest";
  }
  return "?";
}

Chooser parseChooser(const std::string& name) {
  if (name == "learned") return Chooser::kLearned;
  if (name == "random") return Chooser::kRandom;
  if (name == "highest") return Chooser::kHighest;
  fail(ErrorCode::kConfig, "unknown chooser '" + name + "' (learned, random, highest)");
}

void PolicyConfig::validate() const {
  require(high_score_threshold > 0.0 && high_score_threshold < 1.0, ErrorCode::kConfig,
          "high_score_threshold must lie in (0, 1)");
  require(p_high_gate >= 0.0 && p_high_gate <= 1.0, ErrorCode::kConfig, "p_high_gate must lie in [0, 1]");
  require(max_adapt_rounds >= 0, ErrorCode::kConfig, "max_adapt_rounds must be >= 0");
  require(pick != Chooser::kHighest && place != Chooser::kHighest, ErrorCode::kConfig,
          "pick and place accept only learned or random");
}

double pHigh(const std::vector<double>& scores, double threshold) {
  require(!scores.empty(), ErrorCode::kInvalidParameter, "pHigh of an empty map");
  const auto n = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(n) / static_cast<double>(scores.size());
}

Decision decide(const std::vector<double>& map, const PolicyConfig& config) {
  return pHigh(map, config.high_score_threshold) > config.p_high_gate ? Decision::kRetrieve : Decision::kAdapt;
}

std::size_t argmaxIndex(const std::vector<double>& scores) {
  require(!scores.empty(), ErrorCode::kInvalidParameter, "argmax of an empty map");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t highestIndex(const Cloud& cloud) {
  require(!cloud.empty(), ErrorCode::kInvalidParameter, "highest point of an empty cloud");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    if (cloud[i].z > cloud[best].z) best = i;
  }
  return best;
}

int EpisodeLog::adaptations() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) {
    return s.kind == StepKind::kAdapt;
  }));
}

int EpisodeLog::maxRoundsPerRetrieval() const {
  int best = 0;
  int run = 0;
  for (const StepRecord& s : steps) {
    if (s.kind == StepKind::kAdapt) {
      best = std::max(best, ++run);
    } else {
      run = 0;
    }
  }
  return best;
}

std::string EpisodeLog::toText() const {
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof buf, "episode scenario=%s scene_seed=%llu garments=%d initial_p_high=%.6f\n",
                scenarioName(scenario), static_cast<unsigned long long>(scene_seed), initial_garments, initial_p_high);
  os << buf;
  for (const StepRecord& s : steps) {
    if (s.kind == StepKind::kAdapt) {
      std::snprintf(buf, sizeof buf,
                    "step=%d decision=adapt round=%d pick=%d place=%d pick_xyz=%.6f,%.6f,%.6f "
                    "place_xyz=%.6f,%.6f,%.6f p_high_before=%.6f p_high_after=%.6f grasp_miss=%d\n",
                    s.step, s.round, s.pick_index, s.place_index, s.pick_point.x, s.pick_point.y, s.pick_point.z,
                    s.place_point.x, s.place_point.y, s.place_point.z, s.p_high_before, s.p_high_after,
                    s.grasp_miss ? 1 : 0);
    } else {
      std::snprintf(buf, sizeof buf,
                    "step=%d decision=retrieve forced=%d index=%d xyz=%.6f,%.6f,%.6f p_high=%.6f success=%d "
                    "failure=%s target=%u\n",
                    s.step, s.forced ? 1 : 0, s.retrieve_index, s.retrieve_point.x, s.retrieve_point.y,
                    s.retrieve_point.z, s.p_high_before, s.outcome.success ? 1 : 0,
                    failureModeName(s.outcome.failure_mode), s.outcome.target_garment_id);
    }
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "summary attempts=%d successes=%d removed=%zu remaining=%d incomplete=%d", attempts,
                successes, removed_ids.size(), remaining, incomplete ? 1 : 0);
  os << buf;
  for (int m = 1; m < kNumFailureModes; ++m) {
    os << ' ' << failureModeName(static_cast<FailureMode>(m)) << '=' << failures[static_cast<std::size_t>(m)];
  }
  os << '\n';
  return os.str();
}

StepRecord adaptStep(const PolicyModels& models, SceneState& state, const EnvConfig& env, const PolicyConfig& config,
                     const PointCloudObs& obs, const std::vector<double>& retrieval_map, Rng& rng) {
  require(!obs.points.empty(), ErrorCode::kInvalidParameter, "adaptation needs a non-empty observation");
  StepRecord rec;
  rec.kind = StepKind::kAdapt;
  rec.p_high_before = retrieval_map.empty() ? 0.0 : pHigh(retrieval_map, config.high_score_threshold);
  if (config.pick == Chooser::kLearned) {
    require(models.pick != nullptr, ErrorCode::kConfig, "learned pick needs a pick model");
    rec.pick_index = static_cast<int>(argmaxIndex(models.pick->score(obs.points, obs.points)));
  } else {
    rec.pick_index = static_cast<int>(uniformIndex(rng, obs.points.size()));
  }
  const std::vector<Vec3> candidates = placeCandidates(env, state.container.kind, obs.points);
  require(!candidates.empty(), ErrorCode::kConfig, "empty place candidate set");
  if (config.place == Chooser::kLearned) {
    require(models.place != nullptr, ErrorCode::kConfig, "learned place needs a place model");
    rec.place_index = static_cast<int>(argmaxIndex(models.place->score(obs.points, candidates, rec.pick_index)));
  } else {
    rec.place_index = static_cast<int>(uniformIndex(rng, candidates.size()));
  }
  rec.pick_point = obs.points[static_cast<std::size_t>(rec.pick_index)];
  rec.place_point = candidates[static_cast<std::size_t>(rec.place_index)];
  const PickPlaceAction action = makePickPlaceAction(rec.pick_point, rec.place_point, env.motion);
  rec.grasp_miss = !executePickPlace(state, action, env.sim, env.thresholds, env.motion);
  rec.p_high_after = rec.p_high_before;
  if (!rec.grasp_miss && models.retrieve != nullptr) {
    const PointCloudObs after = observe(env, state);
    rec.p_high_after = pHigh(models.retrieve->score(after.points, after.points), config.high_score_threshold);
  }
  return rec;
}

EpisodeLog runEpisode(const PolicyModels& models, SceneState state, const EnvConfig& env, const PolicyConfig& config,
                      std::uint64_t scene_seed) {
  config.validate();
  const bool learned = config.retrieve == Chooser::kLearned;
  require(!learned || models.retrieve != nullptr, ErrorCode::kConfig, "learned retrieval needs a retrieval model");
  EpisodeLog log;
  log.scenario = state.container.kind;
  log.scene_seed = scene_seed;
  log.initial_garments = static_cast<int>(state.garments.size());
  Rng rng(mixSeed(config.seed, scene_seed));
  const int budget = log.initial_garments * (3 + 1) + 5;
  int actions = 0;
  int rounds = 0;
  bool first = true;
  while (!state.garments.empty()) {
    if (actions >= budget) {
      log.incomplete = true;
      break;
    }
    PointCloudObs obs;
    try {
      obs = observe(env, state);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyObservation) throw;
      log.incomplete = true;
      break;
    }
    std::vector<double> map;
    double ph = 0.0;
    if (models.retrieve != nullptr) {
      map = models.retrieve->score(obs.points, obs.points);
      ph = pHigh(map, config.high_score_threshold);
    }
    if (first) log.initial_p_high = ph;
    first = false;
    StepRecord rec;
    rec.step = actions;
    rec.p_high_before = ph;
    if (learned) {
      const bool gate_closed = decide(map, config) == Decision::kAdapt;
      if (gate_closed && rounds < config.max_adapt_rounds) {
        StepRecord a = adaptStep(models, state, env, config, obs, map, rng);
        a.step = actions;
        a.round = ++rounds;
        log.steps.push_back(a);
        ++actions;
        continue;
      }
      rec.forced = gate_closed;
      rec.retrieve_index = static_cast<int>(argmaxIndex(map));
    } else if (config.retrieve == Chooser::kRandom) {
      rec.retrieve_index = static_cast<int>(uniformIndex(rng, obs.points.size()));
    } else {
      rec.retrieve_index = static_cast<int>(highestIndex(obs.points));
    }
    rec.kind = StepKind::kRetrieve;
    rec.retrieve_point = obs.points[static_cast<std::size_t>(rec.retrieve_index)];
    const RetrievalAction action = makeRetrievalAction(state.container, rec.retrieve_point, env.motion);
    rec.outcome = executeRetrieval(state, action, env.sim, env.thresholds, env.motion).outcome;
    rec.grasp_miss = rec.outcome.failure_mode == FailureMode::kGraspMiss;
    ++actions;
    rounds = 0;
    ++log.attempts;
    if (rec.outcome.success) {
      ++log.successes;
    } else {
      ++log.failures[static_cast<std::size_t>(rec.outcome.failure_mode)];
    }
    log.steps.push_back(rec);
    const auto removed = removeExtracted(state);
    log.removed_ids.insert(log.removed_ids.end(), removed.begin(), removed.end());
  }
  log.remaining = static_cast<int>(state.garments.size());
  return log;
}

}  // namespace pileaff
