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

#include "pileaff/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pileaff/bytes.hpp"
#include "pileaff/log.hpp"

namespace pileaff {

using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Configuration

namespace {

/// Binds every configurable field to a dotted path. One table drives parsing, dumping and overrides.
struct FieldTable {
  struct Field {
    std::function<json()> get;
    std::function<void(const json&)> set;
  };
  std::map<std::string, Field> fields;

  template <typename T>
  void num(const std::string& path, T& ref) {
    fields[path] = {[&ref] { return json(ref); },
                    [&ref, path](const json& j) {
                      if (!j.is_number()) fail(ErrorCode::kConfig, path + " must be a number");
                      if constexpr (std::is_integral_v<T>) {
                        if (!j.is_number_integer() && !j.is_number_unsigned()) {
                          fail(ErrorCode::kConfig, path + " must be an integer");
                        }
                        if constexpr (std::is_unsigned_v<T>) {
                          if (j.is_number_integer() && j.get<std::int64_t>() < 0) {
                            fail(ErrorCode::kConfig, path + " must be >= 0");
                          }
                        }
                      }
                      ref = j.get<T>();
                    }};
  }
  void str(const std::string& path, std::string& ref) {
    fields[path] = {[&ref] { return json(ref); },
                    [&ref, path](const json& j) {
                      if (!j.is_string()) fail(ErrorCode::kConfig, path + " must be a string");
                      ref = j.get<std::string>();
                    }};
  }
  void split(const std::string& path, Split& ref) {
    fields[path] = {[&ref] { return json(splitName(ref)); },
                    [&ref, path](const json& j) {
                      if (!j.is_string()) fail(ErrorCode::kConfig, path + " must be a split name");
                      ref = parseSplit(j.get<std::string>());
                    }};
  }
  void statistic(const std::string& path, LabelStatistic& ref) {
    fields[path] = {[&ref] { return json(labelStatisticName(ref)); },
                    [&ref, path](const json& j) {
                      if (!j.is_string()) fail(ErrorCode::kConfig, path + " must be p_high or mean_affordance");
                      ref = parseLabelStatistic(j.get<std::string>());
                    }};
  }
  void scenarios(const std::string& path, std::vector<ContainerKind>& ref) {
    fields[path] = {[&ref] {
                      json a = json::array();
                      for (auto k : ref) a.push_back(scenarioName(k));
                      return a;
                    },
                    [&ref, path](const json& j) {
                      std::vector<ContainerKind> v;
                      if (j.is_string()) {
                        v.push_back(parseScenario(j.get<std::string>()));
                      } else if (j.is_array()) {
                        for (const auto& e : j) {
                          if (!e.is_string()) fail(ErrorCode::kConfig, path + " entries must be scenario names");
                          v.push_back(parseScenario(e.get<std::string>()));
                        }
                      } else {
                        fail(ErrorCode::kConfig, path + " must be a list of scenario names");
                      }
                      ref = v;
                    }};
  }
};

FieldTable fieldTable(RunConfig& c) {
  FieldTable t;
  t.scenarios("scenarios", c.scenarios);
  t.num("seed", c.seed);
  t.str("output_dir", c.output_dir);
  SimParams& s = c.env.sim;
  t.num("env.sim.dt", s.dt);
  t.num("env.sim.substeps", s.substeps);
  t.num("env.sim.gravity", s.gravity);
  t.num("env.sim.spring_damping", s.spring_damping);
  t.num("env.sim.air_damping", s.air_damping);
  t.num("env.sim.contact_radius", s.contact_radius);
  t.num("env.sim.contact_stiffness", s.contact_stiffness);
  t.num("env.sim.contact_ramp", s.contact_ramp);
  t.num("env.sim.contact_damping", s.contact_damping);
  t.num("env.sim.friction_mu_surface", s.friction_mu_surface);
  t.num("env.sim.friction_mu_particle", s.friction_mu_particle);
  t.num("env.sim.settle_ke_tol", s.settle_ke_tol);
  t.num("env.sim.settle_max_steps", s.settle_max_steps);
  t.num("env.sim.max_speed", s.max_speed);
  GenerationParams& g = c.env.gen;
  t.num("env.gen.crumple_amplitude", g.crumple_amplitude);
  t.num("env.gen.fold_probability", g.fold_probability);
  t.num("env.gen.max_tilt", g.max_tilt);
  t.num("env.gen.drop_clearance", g.drop_clearance);
  t.num("env.gen.max_spawn_attempts", g.max_spawn_attempts);
  t.num("env.thresholds.grasp_radius", c.env.thresholds.grasp_radius);
  t.num("env.thresholds.tau_drag", c.env.thresholds.tau_drag);
  t.num("env.thresholds.floor_eps", c.env.thresholds.floor_eps);
  MotionParams& m = c.env.motion;
  t.num("env.motion.speed", m.speed);
  t.num("env.motion.lift_factor", m.lift_factor);
  t.num("env.motion.adapt_clearance", m.adapt_clearance);
  t.num("env.motion.adapt_lift_slope", m.adapt_lift_slope);
  t.num("env.motion.place_stop_depth", m.place_stop_depth);
  t.num("env.motion.release_settle_steps", m.release_settle_steps);
  t.num("env.num_points", c.env.num_points);
  t.num("env.lattice_spacing", c.env.lattice_spacing);
  t.num("env.min_garments", c.env.min_garments);
  t.num("env.max_garments", c.env.max_garments);
  t.split("collect.split", c.collect.split);
  t.num("collect.queries_per_scene", c.collect.queries_per_scene);
  t.num("collect.picks_per_scene", c.collect.picks_per_scene);
  t.num("collect.places_per_pick", c.collect.places_per_pick);
  t.num("collect.delta", c.collect.delta);
  t.statistic("collect.label_statistic", c.collect.statistic);
  t.num("collect.min_class_fraction", c.collect.min_class_fraction);
  t.num("collect.budget_factor", c.collect.budget_factor);
  t.num("counts.retrieve", c.counts.retrieve);
  t.num("counts.place", c.counts.place);
  t.num("counts.pick", c.counts.pick);
  t.num("train.retrieve_epochs", c.train.retrieve_epochs);
  t.num("train.place_epochs", c.train.place_epochs);
  t.num("train.pick_epochs", c.train.pick_epochs);
  t.num("train.retrieve_batch", c.train.retrieve_batch);
  t.num("train.place_batch", c.train.place_batch);
  t.num("train.pick_batch", c.train.pick_batch);
  t.num("train.adam.lr", c.train.adam.lr);
  t.num("train.adam.beta1", c.train.adam.beta1);
  t.num("train.adam.beta2", c.train.adam.beta2);
  t.num("train.adam.eps", c.train.adam.eps);
  t.num("train.holdout_fraction", c.train.holdout_fraction);
  t.num("policy.high_score_threshold", c.policy.high_score_threshold);
  t.num("policy.p_high_gate", c.policy.p_high_gate);
  t.num("policy.max_adapt_rounds", c.policy.max_adapt_rounds);
  t.num("policy.seed", c.policy.seed);
  t.num("eval.num_scenes", c.eval.num_scenes);
  t.num("eval.seed", c.eval.seed);
  t.split("finetune.split", c.finetune.split);
  t.num("finetune.max_iterations", c.finetune.max_iterations);
  t.num("finetune.window", c.finetune.window);
  t.num("finetune.stop_delta", c.finetune.stop_delta);
  t.num("finetune.offline_per_batch", c.finetune.offline_per_batch);
  t.num("finetune.adam.lr", c.finetune.adam.lr);
  return t;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else {
    out[prefix] = j;
  }
}

json toJson(const RunConfig& cfg, bool with_output) {
  RunConfig copy = cfg;
  FieldTable t = fieldTable(copy);
  json root = json::object();
  for (const auto& [path, field] : t.fields) {
    if (!with_output && path == "output_dir") continue;
    std::string p = "/" + path;
    std::replace(p.begin(), p.end(), '.', '/');
    root[json::json_pointer(p)] = field.get();
  }
  return root;
}

}  // namespace

void RunConfig::validate() const {
  require(!scenarios.empty(), ErrorCode::kConfig, "scenarios must not be empty");
  env.validate();
  policy.validate();
  require(counts.retrieve > 0 && counts.place > 0 && counts.pick > 0, ErrorCode::kConfig, "sample counts must be > 0");
  require(train.retrieve_epochs >= 0 && train.place_epochs >= 0 && train.pick_epochs >= 0, ErrorCode::kConfig,
          "epochs must be >= 0");
  require(train.retrieve_batch > 0 && train.place_batch > 0 && train.pick_batch > 0, ErrorCode::kConfig,
          "batch sizes must be > 0");
  require(eval.num_scenes > 0, ErrorCode::kConfig, "eval.num_scenes must be > 0");
  CollectConfig c = collect;
  c.target_count = 1;
  c.validate();
  finetune.validate();
}

std::string RunConfig::canonicalJson() const { return toJson(*this, false).dump(); }

std::string RunConfig::hash() const {
  const std::string s = canonicalJson();
  return hexDigest(fnv1a(s.data(), s.size()));
}

std::string runConfigJson(const RunConfig& config) { return toJson(config, true).dump(2) + "\n"; }

RunConfig parseRunConfig(const std::string& json_text) {
  json j;
  try {
    // Comments are allowed so config files can carry a license header and notes.
    j = json::parse(json_text, nullptr, true, true);
  } catch (const std::exception& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::kConfig, "config must be a JSON object");
  std::map<std::string, json> flat;
  flatten(j, "", flat);
  RunConfig cfg;
  FieldTable t = fieldTable(cfg);
  for (const auto& [path, value] : flat) {
    auto it = t.fields.find(path);
    require(it != t.fields.end(), ErrorCode::kConfig, "unknown config key '" + path + "'");
    try {
      it->second.set(value);
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, path + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig loadRunConfig(const std::string& path) {
  std::string text;
  try {
    text = readFile(path);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  return parseRunConfig(text);
}

void applyOverride(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorCode::kConfig, "override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  FieldTable t = fieldTable(config);
  auto it = t.fields.find(key);
  require(it != t.fields.end(), ErrorCode::kConfig, "unknown config key '" + key + "'");
  json value;
  try {
    value = json::parse(raw);
  } catch (const std::exception&) {
    value = json(raw);
  }
  try {
    it->second.set(value);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, key + ": " + e.what());
  }
  config.validate();
}

// ---------------------------------------------------------------------------------------------
// Evaluation

const char* methodName(Method m) {
  switch (m) {
    case Method::kFull: return "full";
    case Method::kNoAdaptation: return "no-adaptation";
    case Method::kNoPickAfford: return "no-pick-afford";
    case Method::kNoPlaceAfford: return "no-place-afford";
    case Method::kRandomAdapt: return "random-adapt";
    case Method::kRandomPoint: return "random-point";
    case Method::kHighestPoint: return "highest-point";
  }
  return "?";
}

Method parseMethod(const std::string& name) {
  for (Method m : {Method::kFull, Method::kNoAdaptation, Method::kNoPickAfford, Method::kNoPlaceAfford,
                   Method::kRandomAdapt, Method::kRandomPoint, Method::kHighestPoint}) {
    if (name == methodName(m)) return m;
  }
  fail(ErrorCode::kConfig, "unknown method '" + name +
                               "' (full, no-adaptation, no-pick-afford, no-place-afford, random-adapt, random-point, "
                               "highest-point)");
}

PolicyConfig policyFor(Method m, const PolicyConfig& base) {
  PolicyConfig p = base;
  switch (m) {
    case Method::kFull: break;
    case Method::kNoAdaptation: p.max_adapt_rounds = 0; break;
    case Method::kNoPickAfford: p.pick = Chooser::kRandom; break;
    case Method::kNoPlaceAfford: p.place = Chooser::kRandom; break;
    case Method::kRandomAdapt:
      p.pick = Chooser::kRandom;
      p.place = Chooser::kRandom;
      break;
    case Method::kRandomPoint:
      p.retrieve = Chooser::kRandom;
      p.max_adapt_rounds = 0;
      break;
    case Method::kHighestPoint:
      p.retrieve = Chooser::kHighest;
      p.max_adapt_rounds = 0;
      break;
  }
  return p;
}

ScenarioStats EvalReport::pooled() const {
  ScenarioStats all;
  for (const ScenarioStats& s : scenarios) {
    all.scenes += s.scenes;
    all.attempts += s.attempts;
    all.successes += s.successes;
    for (int k = 0; k < kNumFailureModes; ++k) all.failures[static_cast<std::size_t>(k)] += s.failures[static_cast<std::size_t>(k)];
    all.adaptations += s.adaptations;
    all.forced += s.forced;
    all.max_rounds = std::max(all.max_rounds, s.max_rounds);
    all.cleared += s.cleared;
    all.incomplete += s.incomplete;
    all.delta_p_high.insert(all.delta_p_high.end(), s.delta_p_high.begin(), s.delta_p_high.end());
  }
  return all;
}

namespace {

std::string statsRow(const std::string& method, Split split, const std::string& scenario, const ScenarioStats& s) {
  double mean_dp = 0.0;
  for (double d : s.delta_p_high) mean_dp += d;
  if (!s.delta_p_high.empty()) mean_dp /= static_cast<double>(s.delta_p_high.size());
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%d,%d,%.6f,%d,%d,%d,%d,%d,%d,%d,%.6f,%.6f,%d\n", method.c_str(),
                splitName(split), scenario.c_str(), s.scenes, s.attempts, s.successes, s.successRate(),
                s.failures[1], s.failures[2], s.failures[3], s.failures[4], s.adaptations, s.forced, s.max_rounds,
                mean_dp, s.clearedRate(), s.incomplete);
  return buf;
}

constexpr const char* kCsvHeader =
    "method,split,scenario,scenes,attempts,successes,success_rate,grasp_miss,floor_contact,drag_out,not_extracted,"
    "adaptations,forced,max_rounds,mean_delta_p_high,cleared_rate,incomplete\n";

}  // namespace

std::string EvalReport::toCsv() const {
  std::ostringstream os;
  os << "# config_hash=" << config_hash << " seed=" << seed << " method=" << method << " split=" << splitName(split)
     << "\n# success_rate = successful retrievals / attempted retrievals\n"
     << kCsvHeader;
  for (const ScenarioStats& s : scenarios) os << statsRow(method, split, scenarioName(s.scenario), s);
  os << statsRow(method, split, "all", pooled());
  return os.str();
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s (%s split, seed %llu, config %s); rate = successes / attempted retrievals\n",
                method.c_str(), splitName(split), static_cast<unsigned long long>(seed), config_hash.c_str());
  os << buf;
  auto line = [&](const std::string& name, const ScenarioStats& s) {
    std::snprintf(buf, sizeof buf,
                  "  %-15s scenes %4d  attempts %4d  success %.3f  cleared %.3f  adaptations %4d  forced %4d  "
                  "max rounds %d\n",
                  name.c_str(), s.scenes, s.attempts, s.successRate(), s.clearedRate(), s.adaptations, s.forced,
                  s.max_rounds);
    os << buf;
  };
  for (const ScenarioStats& s : scenarios) line(scenarioName(s.scenario), s);
  line("all", pooled());
  return os.str();
}

std::vector<SceneRef> evalScenes(SceneCache& scenes, ContainerKind scenario, Split split, int count,
                                 std::uint64_t seed) {
  require(count > 0, ErrorCode::kConfig, "number of evaluation scenes must be > 0");
  std::vector<SceneRef> out;
  const std::uint64_t stream = mixSeed(seed, 0xe7a1 + static_cast<std::uint64_t>(split));
  for (std::uint64_t i = 0; static_cast<int>(out.size()) < count; ++i) {
    require(i < static_cast<std::uint64_t>(count) * 2 + 20, ErrorCode::kSceneGeneration,
            "too many evaluation scenes failed to generate");
    const SceneRef ref = sceneAt({scenario}, stream, i);
    try {
      scenes.get(ref.scenario, split, ref.scene_seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSceneGeneration) throw;
      logWarn(std::string("skipping evaluation scene: ") + e.what());
      continue;
    }
    out.push_back(ref);
  }
  return out;
}

std::vector<SceneRef> lowPHighScenes(SceneCache& scenes, const std::vector<SceneRef>& refs, Split split,
                                     const ModelF& retrieval, const PolicyConfig& policy) {
  std::vector<SceneRef> out;
  for (const SceneRef& ref : refs) {
    const PointCloudObs obs = observe(scenes.env(), scenes.get(ref.scenario, split, ref.scene_seed));
    if (pHigh(retrieval.score(obs.points, obs.points), policy.high_score_threshold) <= policy.p_high_gate) {
      out.push_back(ref);
    }
  }
  return out;
}

EvalReport evaluateScenes(const PolicyModels& models, SceneCache& scenes, const std::vector<SceneRef>& refs,
                          Split split, const PolicyConfig& policy, const std::string& method,
                          const std::string& config_hash, std::uint64_t seed) {
  policy.validate();
  EvalReport rep;
  rep.method = method;
  rep.config_hash = config_hash;
  rep.seed = seed;
  rep.split = split;
  PolicyConfig pc = policy;
  pc.seed = mixSeed(policy.seed, seed);
  for (const SceneRef& ref : refs) {
    auto it = std::find_if(rep.scenarios.begin(), rep.scenarios.end(),
                           [&](const ScenarioStats& s) { return s.scenario == ref.scenario; });
    if (it == rep.scenarios.end()) {
      rep.scenarios.push_back({});
      rep.scenarios.back().scenario = ref.scenario;
      it = rep.scenarios.end() - 1;
    }
    EpisodeLog log = runEpisode(models, scenes.get(ref.scenario, split, ref.scene_seed), scenes.env(), pc,
                                ref.scene_seed);
    ScenarioStats& s = *it;
    ++s.scenes;
    s.attempts += log.attempts;
    s.successes += log.successes;
    for (int k = 0; k < kNumFailureModes; ++k) s.failures[static_cast<std::size_t>(k)] += log.failures[static_cast<std::size_t>(k)];
    s.adaptations += log.adaptations();
    s.max_rounds = std::max(s.max_rounds, log.maxRoundsPerRetrieval());
    s.cleared += log.remaining == 0 ? 1 : 0;
    s.incomplete += log.incomplete ? 1 : 0;
    for (const StepRecord& r : log.steps) {
      if (r.kind == StepKind::kAdapt) s.delta_p_high.push_back(r.p_high_after - r.p_high_before);
      if (r.kind == StepKind::kRetrieve && r.forced) ++s.forced;
    }
    rep.episodes.push_back(std::move(log));
  }
  return rep;
}

EvalReport evaluate(const PolicyModels& models, SceneCache& scenes, const std::vector<ContainerKind>& scenarios,
                    int num_scenes, std::uint64_t seed, Split split, Method method, const PolicyConfig& base,
                    const std::string& config_hash) {
  require(num_scenes > 0, ErrorCode::kConfig, "num_scenes must be > 0");
  require(!scenarios.empty(), ErrorCode::kConfig, "no scenarios selected");
  std::vector<SceneRef> refs;
  for (ContainerKind k : scenarios) {
    const auto part = evalScenes(scenes, k, split, num_scenes, seed);
    refs.insert(refs.end(), part.begin(), part.end());
  }
  return evaluateScenes(models, scenes, refs, split, policyFor(method, base), methodName(method), config_hash, seed);
}

std::vector<SweepRow> adaptationRoundSweep(const PolicyModels& models, SceneCache& scenes,
                                           const std::vector<SceneRef>& refs, Split split, const PolicyConfig& base,
                                           const std::string& config_hash, std::uint64_t seed) {
  std::vector<SweepRow> rows;
  for (int r = 0; r <= 3; ++r) {
    PolicyConfig p = base;
    p.max_adapt_rounds = r;
    rows.push_back({std::to_string(r), evaluateScenes(models, scenes, refs, split, p, "rounds-" + std::to_string(r),
                                                      config_hash, seed)});
  }
  PolicyConfig p = policyFor(Method::kRandomAdapt, base);
  p.max_adapt_rounds = 3;
  rows.push_back({"3-rand", evaluateScenes(models, scenes, refs, split, p, "rounds-3-rand", config_hash, seed)});
  return rows;
}

std::string sweepCsv(const std::vector<SweepRow>& rows, const std::string& config_hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# config_hash=" << config_hash << " seed=" << seed
     << "\n# success_rate = successful retrievals / attempted retrievals\n"
     << "rounds,scenes,attempts,successes,success_rate,adaptations,forced\n";
  char buf[256];
  for (const SweepRow& r : rows) {
    const ScenarioStats s = r.report.pooled();
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.6f,%d,%d\n", r.setting.c_str(), s.scenes, s.attempts, s.successes,
                  s.successRate(), s.adaptations, s.forced);
    os << buf;
  }
  return os.str();
}

std::vector<int> bruteForceOracle(const SceneState& scene, const EnvConfig& env, const PointCloudObs& obs,
                                  const std::vector<int>& candidates) {
  require(candidates.size() <= 64, ErrorCode::kInvalidParameter, "oracle accepts at most 64 candidates");
  const std::string snap = snapshot(scene);
  std::vector<int> out;
  for (int c : candidates) {
    require(c >= 0 && static_cast<std::size_t>(c) < obs.points.size(), ErrorCode::kInvalidParameter,
            "oracle candidate index out of range");
    SceneState w = restore(snap);
    const RetrievalAction a = makeRetrievalAction(w.container, obs.points[static_cast<std::size_t>(c)], env.motion);
    if (executeRetrieval(w, a, env.sim, env.thresholds, env.motion).outcome.success) out.push_back(c);
  }
  return out;
}

void exportAffordance(const std::string& path, const Cloud& points, const std::vector<double>& scores,
                      const std::string& config_hash, std::uint64_t seed) {
  require(points.size() == scores.size(), ErrorCode::kInvalidParameter,
          "affordance map has " + std::to_string(scores.size()) + " scores for " + std::to_string(points.size()) +
              " points");
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\n";
  if (!config_hash.empty()) os << "comment config_hash " << config_hash << "\n";
  os << "comment seed " << seed << "\n";
  os << "element vertex " << points.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\nproperty float affordance\nend_header\n";
  char buf[128];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g\n", static_cast<double>(static_cast<float>(points[i].x)),
                  static_cast<double>(static_cast<float>(points[i].y)),
                  static_cast<double>(static_cast<float>(points[i].z)),
                  static_cast<double>(static_cast<float>(scores[i])));
    os << buf;
  }
  writeFile(path, os.str());
}

AffordancePly readAffordancePly(const std::string& path) {
  std::istringstream in(readFile(path));
  std::string line;
  require(std::getline(in, line) && line == "ply", ErrorCode::kFormat, "not a PLY file");
  std::size_t n = 0;
  std::vector<std::string> props;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      header_done = true;
      break;
    }
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      require(fmt == "ascii", ErrorCode::kFormat, "only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name >> n;
      require(name == "vertex", ErrorCode::kFormat, "unexpected PLY element " + name);
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    }
  }
  require(header_done, ErrorCode::kFormat, "PLY header not terminated");
  require(props == std::vector<std::string>{"x", "y", "z", "affordance"}, ErrorCode::kFormat,
          "PLY must have x y z affordance properties");
  AffordancePly out;
  for (std::size_t i = 0; i < n; ++i) {
    float x, y, z, a;
    require(static_cast<bool>(in >> x >> y >> z >> a), ErrorCode::kFormat, "truncated PLY vertex list");
    out.points.push_back({x, y, z});
    out.scores.push_back(a);
  }
  return out;
}

std::vector<EvalReport> generalizationEval(const PolicyModels& models, SceneCache& scenes,
                                           const std::vector<ContainerKind>& scenarios, int num_scenes,
                                           std::uint64_t seed, const PolicyConfig& base,
                                           const std::string& config_hash) {
  require(splitsDisjoint(scenes.pool()), ErrorCode::kConfig, "template splits overlap");
  std::vector<EvalReport> out;
  for (Split s : {Split::kSeen, Split::kNovelShape, Split::kNovelCategory}) {
    require(!scenes.pool().select(s).empty(), ErrorCode::kConfig,
            std::string("split ") + splitName(s) + " has no templates");
    out.push_back(evaluate(models, scenes, scenarios, num_scenes, seed, s, Method::kFull, base, config_hash));
  }
  return out;
}

bool splitsDisjoint(const TemplatePool& pool) {
  std::set<std::string> seen_ids;
  std::set<Category> seen_categories;
  for (const auto& e : pool.entries) {
    if (e.split == Split::kSeen) {
      seen_ids.insert(e.tmpl->template_id);
      seen_categories.insert(e.tmpl->category);
    }
  }
  for (const auto& e : pool.entries) {
    if (e.split == Split::kSeen) continue;
    if (seen_ids.count(e.tmpl->template_id)) return false;
    if (e.split == Split::kNovelCategory && seen_categories.count(e.tmpl->category)) return false;
  }
  return true;
}

}  // namespace pileaff
