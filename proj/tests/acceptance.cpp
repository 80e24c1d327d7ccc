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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any
// criterion fails. Usage: acceptance [artifact_dir] [--reuse]
//   --reuse loads datasets and checkpoints already present in artifact_dir instead of rebuilding.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pileaff/bytes.hpp"
#include "pileaff/commands.hpp"
#include "pileaff/log.hpp"

namespace pileaff {
namespace {

namespace fs = std::filesystem;

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::map<int, Verdict> g_results;

void record(int id, bool pass, const std::string& detail) {
  g_results[id] = {pass, detail};
  std::printf("criterion %d: %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

// Runs one criterion, turning exceptions into failures.
void check(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    record(id, false, std::string("exception: ") + e.what());
  }
}

// ---- 1: gradient oracle ----------------------------------------------------------------------

std::vector<Vec3> randomCloud(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> c(static_cast<std::size_t>(n));
  for (auto& p : c) p = {uniform01(rng) - 0.5, uniform01(rng) - 0.5, 0.3 * uniform01(rng)};
  return c;
}

double worstTensorError(ModuleKind kind, std::string* worst_name) {
  const int n = 32;
  const auto cloud = randomCloud(n, 101);
  ModelD model(kind, ModelArch::tiny(kind, n), 17);
  // Positive biases keep the rectifiers mostly active so every path is exercised.
  for (const auto& t : model.tensors()) {
    if (t.cols == 1) {
      for (std::size_t i = 0; i < t.size(); ++i) model.params()[t.offset + i] = 0.05;
    }
  }
  Rng rng(5);
  TrainGroup g;
  g.cloud = &cloud;
  g.pick_index = kind == ModuleKind::kPlace ? 3 : -1;
  for (int i = 0; i < 8; ++i) {
    g.queries.push_back(cloud[uniformIndex(rng, cloud.size())]);
    g.labels.push_back(static_cast<int>(rng() % 2));
  }
  const std::vector<TrainGroup> batch{g};
  std::vector<double> grad, scratch;
  lossAndGradient(model, batch, grad);
  const double h = 1e-5;
  double worst = 0.0;
  for (const auto& t : model.tensors()) {
    double num2 = 0.0, ana2 = 0.0, diff2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double& p = model.params()[t.offset + i];
      const double orig = p;
      p = orig + h;
      const double lp = lossAndGradient(model, batch, scratch);
      p = orig - h;
      const double lm = lossAndGradient(model, batch, scratch);
      p = orig;
      const double num = (lp - lm) / (2.0 * h);
      const double ana = grad[t.offset + i];
      num2 += num * num;
      ana2 += ana * ana;
      diff2 += (num - ana) * (num - ana);
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(num2), std::sqrt(ana2), 1e-12});
    if (rel > worst) {
      worst = rel;
      *worst_name = t.name;
    }
  }
  return worst;
}

void criterion1() {
  const double t0 = now();
  std::string detail;
  bool ok = true;
  for (ModuleKind k : {ModuleKind::kRetrieve, ModuleKind::kPlace, ModuleKind::kPick}) {
    std::string name;
    const double e = worstTensorError(k, &name);
    ok = ok && e < 1e-4;
    detail += fmt("%s max rel err %.2e (%s); ", moduleName(k), e, name.c_str());
  }
  const double dt = now() - t0;
  record(1, ok && dt < 300.0, detail + fmt("%.1f s", dt));
}

// ---- 2: BCE closed form -----------------------------------------------------------------------

void criterion2() {
  const double a = bce(0.5, 1), b = bce(0.9, 0), c = bce(1.0, 1);
  const bool ok = std::abs(a - std::log(2.0)) <= 1e-9 && std::abs(b - 2.302585) <= 1e-6 && c <= 2e-7;
  record(2, ok, fmt("bce(0.5,1)=%.12f bce(0.9,0)=%.7f bce(1,1)=%.3e", a, b, c));
}

// ---- 3: simulator determinism and sanity ------------------------------------------------------

void criterion3(const TemplatePool& pool) {
  const double t0 = now();
  const SimParams sim;
  const auto templates = pool.select(Split::kSeen);
  int scenes = 0, nondeterministic = 0, penetrating = 0, energy_violations = 0;
  double worst_rise = -1e9, worst_pen = 0.0;
  for (std::uint64_t i = 0; scenes < 50; ++i) {
    const auto kind = static_cast<ContainerKind>(i % kNumScenarios);
    const std::uint64_t seed = mixSeed(0xacce, i);
    const int garments = 2 + static_cast<int>(i % 2);
    SceneState a, b;
    try {
      a = generateScene(kind, garments, seed, templates, sim);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSceneGeneration) throw;
      continue;
    }
    b = generateScene(kind, garments, seed, templates, sim);
    ++scenes;
    bool same = bitIdentical(a, b);
    double e0 = mechanicalEnergy(a, sim).total();
    for (int s = 0; s < 200; ++s) {
      step(a, sim);
      step(b, sim);
      const double e1 = mechanicalEnergy(a, sim).total();
      worst_rise = std::max(worst_rise, e1 - e0);
      if (e1 - e0 > 1e-6) ++energy_violations;
      e0 = e1;
    }
    same = same && bitIdentical(a, b);
    if (!same) ++nondeterministic;
    // Penetration of a particle sphere into the floor plane z = 0 (the sphere bottom is z - r).
    double floor_pen = 0.0;
    for (const auto& g : a.garments) {
      for (const Vec3& p : g.positions) floor_pen = std::max(floor_pen, sim.contact_radius - p.z);
    }
    worst_pen = std::max(worst_pen, floor_pen);
    if (floor_pen > sim.contact_radius) ++penetrating;
  }
  const double dt = now() - t0;
  const bool ok = nondeterministic == 0 && penetrating == 0 && energy_violations == 0 && dt < 600.0;
  record(3, ok,
         fmt("%d scenes: %d nondeterministic, %d over-penetrating (worst floor penetration %.4f m, limit %.3f), "
             "%d energy rises > 1e-6 J (worst %.2e J), %.1f s",
             scenes, nondeterministic, penetrating, worst_pen, sim.contact_radius, energy_violations, worst_rise, dt));
}

// ---- 4: label oracle equivalence ----------------------------------------------------------------

void criterion4(const TemplatePool& pool) {
  EnvConfig env;
  env.min_garments = env.max_garments = 2;
  SceneCache cache(env, pool);
  CollectConfig cc;
  cc.scenarios = {ContainerKind::kWashingMachine, ContainerKind::kBasket, ContainerKind::kSofa};
  cc.queries_per_scene = 8;
  cc.target_count = 30 * 8;
  cc.min_class_fraction = 0.0;  // keep every rollout so each scene carries all its labels
  cc.seed = 0x0ac1e;
  cc.config_hash = "acceptance";
  const Dataset d = collectRetrievalData(cache, cc);
  std::map<std::pair<int, std::uint64_t>, std::vector<const Sample*>> by_scene;
  for (const Sample& s : d.samples) by_scene[{static_cast<int>(s.scenario), s.scene_seed}].push_back(&s);
  int scenes = 0, compared = 0, mismatches = 0;
  for (const auto& [key, samples] : by_scene) {
    const SceneState scene = cache.get(static_cast<ContainerKind>(key.first), Split::kSeen, key.second);
    const PointCloudObs obs = observe(env, scene);
    std::vector<int> cands;
    for (const Sample* s : samples) cands.push_back(s->query_index);
    const auto ok = bruteForceOracle(scene, env, obs, cands);
    for (const Sample* s : samples) {
      const bool member = std::find(ok.begin(), ok.end(), s->query_index) != ok.end();
      ++compared;
      if (member != (s->label == 1)) ++mismatches;
    }
    ++scenes;
  }
  record(4, scenes >= 30 && mismatches == 0,
         fmt("%d scenes, %d labels compared, %d mismatches", scenes, compared, mismatches));
}

// ---- 5: separable learning task -------------------------------------------------------------------

void criterion5(const TemplatePool& pool) {
  SceneCache cache(EnvConfig{}, pool);
  const Dataset d = makeHeightDataset(cache, {ContainerKind::kWashingMachine, ContainerKind::kSofa, ContainerKind::kBasket},
                                      40, 64, 0x4e16);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 64;
  tc.seed = 7;
  tc.holdout_fraction = 0.2;
  const TrainResult r = trainModule(ModuleKind::kRetrieve, d, ModelArch::defaults(ModuleKind::kRetrieve), tc);
  double best = 0.0;
  int best_epoch = 0;
  for (const EpochStats& e : r.curve) {
    if (e.holdout_accuracy > best) best = e.holdout_accuracy, best_epoch = e.epoch;
  }
  record(5, best >= 0.9,
         fmt("best held-out accuracy %.3f at epoch %d (final %.3f) over %zu held-out scenes", best, best_epoch,
             r.curve.back().holdout_accuracy, r.holdout_scenes.size()));
}

// ---- 6-9: trained pipeline --------------------------------------------------------------------

struct Pipeline {
  RunConfig cfg;
  ModelF retrieve, place, pick;
  PolicyModels models() const { return {&retrieve, &place, &pick}; }
};

ModelF buildModule(const RunConfig& cfg, const std::string& dir, const std::string& module, bool reuse) {
  const std::string data = dir + "/" + module + ".affd";
  const std::string ckpt = dir + "/" + module + ".aff1";
  CommandOptions o;
  o.module = module;
  o.retrieve_ckpt = module == "retrieve" ? "" : dir + "/retrieve.aff1";
  o.place_ckpt = module == "pick" ? dir + "/place.aff1" : "";
  if (reuse && fs::exists(ckpt)) return loadModelChecked(ckpt, parseModule(module), cfg);
  if (!(reuse && fs::exists(data))) {
    o.output = data;
    std::printf("  %s\n", cmdCollect(cfg, o).c_str());
  }
  if (!(reuse && fs::exists(ckpt))) {
    o.output = ckpt;
    o.dataset = data;
    std::printf("  %s\n", cmdTrain(cfg, o).c_str());
  }
  std::fflush(stdout);
  return loadModelChecked(ckpt, parseModule(module), cfg);
}

int maxRounds(const EvalReport& r) {
  int m = 0;
  for (const EpisodeLog& l : r.episodes) m = std::max(m, l.maxRoundsPerRetrieval());
  return m;
}

}  // namespace
}  // namespace pileaff

int main(int argc, char** argv) {
  using namespace pileaff;
  const std::string dir = argc > 1 && std::string(argv[1]) != "--reuse" ? argv[1] : "acceptance_artifacts";
  bool reuse = false;
  for (int i = 1; i < argc; ++i) reuse = reuse || std::string(argv[i]) == "--reuse";
  fs::create_directories(dir);
  setLogLevel(LogLevel::kWarn);
  const TemplatePool pool = defaultTemplatePool();

  check(1, criterion1);
  check(2, criterion2);
  check(3, [&] { criterion3(pool); });
  check(4, [&] { criterion4(pool); });
  check(5, [&] { criterion5(pool); });

  // The trained pipeline shared by criteria 6 to 9.
  Pipeline p;
  p.cfg.output_dir = dir;
  std::vector<const EvalReport*> all_reports;
  EvalReport full, random_point, highest;
  std::vector<SceneRef> refs;
  bool pipeline_ok = false;
  const double t0 = now();
  check(6, [&] {
    p.retrieve = buildModule(p.cfg, dir, "retrieve", reuse);
    p.place = buildModule(p.cfg, dir, "place", reuse);
    p.pick = buildModule(p.cfg, dir, "pick", reuse);
    SceneCache cache(p.cfg.env, pool);
    for (ContainerKind k : p.cfg.scenarios) {
      const auto part = evalScenes(cache, k, Split::kSeen, p.cfg.eval.num_scenes, p.cfg.eval.seed);
      refs.insert(refs.end(), part.begin(), part.end());
    }
    const std::string hash = p.cfg.hash();
    auto run = [&](Method m) {
      EvalReport r = evaluateScenes(p.models(), cache, refs, Split::kSeen, policyFor(m, p.cfg.policy), methodName(m),
                                    hash, p.cfg.eval.seed);
      writeFile(dir + "/eval_" + methodName(m) + "_seen.csv", r.toCsv());
      return r;
    };
    full = run(Method::kFull);
    random_point = run(Method::kRandomPoint);
    highest = run(Method::kHighestPoint);
    pipeline_ok = true;
    const double dt = now() - t0;
    const double f = full.pooled().successRate(), r = random_point.pooled().successRate(),
                 h = highest.pooled().successRate();
    std::string per;
    bool per_ok = true;
    for (std::size_t i = 0; i < full.scenarios.size(); ++i) {
      const double fs_ = full.scenarios[i].successRate(), rs = random_point.scenarios[i].successRate(),
                   hs = highest.scenarios[i].successRate();
      per += fmt(" %s %.3f/%.3f/%.3f;", scenarioName(full.scenarios[i].scenario), fs_, rs, hs);
      per_ok = per_ok && fs_ - rs >= 0.15 && fs_ - hs >= 0.05;
    }
    const bool ok = f - r >= 0.15 && f - h >= 0.05 && dt < 7200.0;
    record(6, ok,
           fmt("%zu scenes: learned %.3f, random %.3f (%+.1f pp), highest %.3f (%+.1f pp); per scenario "
               "learned/random/highest:",
               refs.size(), f, r, 100 * (f - r), h, 100 * (f - h)) +
               per + fmt(" per-scenario margins %s; %.0f s", per_ok ? "met" : "not met", dt));
  });
  if (pipeline_ok) {
    all_reports = {&full, &random_point, &highest};
  }

  std::vector<SweepRow> sweep;
  check(7, [&] {
    if (!pipeline_ok) throw Error(ErrorCode::kPrecondition, "pipeline unavailable");
    SceneCache cache(p.cfg.env, pool);
    const auto low = lowPHighScenes(cache, refs, Split::kSeen, p.retrieve, p.cfg.policy);
    if (low.empty()) throw Error(ErrorCode::kIncomplete, "no scene has initial P_high <= gate");
    sweep = adaptationRoundSweep(p.models(), cache, low, Split::kSeen, p.cfg.policy, p.cfg.hash(), p.cfg.eval.seed);
    writeFile(dir + "/sweep_rounds.csv", sweepCsv(sweep, p.cfg.hash(), p.cfg.eval.seed));
    std::map<std::string, double> r;
    for (const SweepRow& row : sweep) r[row.setting] = row.report.pooled().successRate();
    bool monotone = true;
    for (int k = 0; k < 3; ++k) monotone = monotone && r[std::to_string(k + 1)] >= r[std::to_string(k)] - 0.03;
    const bool adapt_gain = r["3"] - r["0"] >= 0.05;
    const bool beats_random = r["3"] - r["3-rand"] >= 0.03;
    record(7, adapt_gain && monotone && beats_random,
           fmt("%zu low-P_high scenes: rounds 0/1/2/3 = %.3f/%.3f/%.3f/%.3f, 3-rand %.3f; full - no-adaptation "
               "%+.1f pp, sweep %s, 3-learned - 3-random %+.1f pp",
               low.size(), r["0"], r["1"], r["2"], r["3"], r["3-rand"], 100 * (r["3"] - r["0"]),
               monotone ? "non-decreasing within 3 pp" : "not monotone", 100 * (r["3"] - r["3-rand"])));
  });
  for (const SweepRow& row : sweep) all_reports.push_back(&row.report);

  std::vector<EvalReport> novel;
  check(9, [&] {
    if (!pipeline_ok) throw Error(ErrorCode::kPrecondition, "pipeline unavailable");
    SceneCache cache(p.cfg.env, pool);
    const int n = 50;
    for (Split s : {Split::kNovelShape, Split::kNovelCategory}) {
      novel.push_back(evaluate(p.models(), cache, p.cfg.scenarios, n, p.cfg.eval.seed, s, Method::kFull, p.cfg.policy,
                               p.cfg.hash()));
      writeFile(dir + "/eval_full_" + splitName(s) + ".csv", novel.back().toCsv());
    }
    const double seen = full.pooled().successRate(), shape = novel[0].pooled().successRate(),
                 category = novel[1].pooled().successRate();
    record(9, seen >= category,
           fmt("seen %.3f (%zu scenes), novel-shape %.3f, novel-category %.3f (%d scenes each); template splits "
               "disjoint: %s",
               seen, refs.size(), shape, category, n * static_cast<int>(p.cfg.scenarios.size()),
               splitsDisjoint(pool) ? "yes" : "no"));
  });
  for (const EvalReport& r : novel) all_reports.push_back(&r);

  check(8, [&] {
    // Exact gate arithmetic.
    PolicyConfig pc;
    bool ok = pHigh({0.95, 0.5, 0.91, 0.2}, 0.9) == 0.5 && pHigh({0.9, 0.9}, 0.9) == 0.0 &&
              pHigh({0.9000001}, 0.9) == 1.0;
    std::vector<double> map(10, 0.0);
    map[0] = 0.95;
    ok = ok && decide(map, pc) == Decision::kAdapt;  // P_high == gate exactly
    map[1] = 0.95;
    ok = ok && decide(map, pc) == Decision::kRetrieve;
    map.assign(10, 0.9);
    ok = ok && decide(map, pc) == Decision::kAdapt;  // scores equal to the threshold do not count
    int worst = 0;
    std::size_t episodes = 0;
    for (const EvalReport* r : all_reports) {
      worst = std::max(worst, maxRounds(*r));
      episodes += r->episodes.size();
    }
    record(8, ok && worst <= 3 && episodes > 0,
           fmt("gate examples %s; max adaptation rounds per retrieval %d over %zu logged episodes",
               ok ? "exact" : "WRONG", worst, episodes));
  });

  int failed = 0;
  std::printf("\nsummary:\n");
  for (const auto& [id, v] : g_results) {
    std::printf("  criterion %d %s\n", id, v.pass ? "PASS" : "FAIL");
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
