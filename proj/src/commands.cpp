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

#include "pileaff/commands.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pileaff/bytes.hpp"
#include "pileaff/log.hpp"

namespace pileaff {

namespace fs = std::filesystem;

namespace {

std::string outPath(const RunConfig& cfg, const CommandOptions& o, const std::string& default_name) {
  const std::string p = o.output.empty() ? (fs::path(cfg.output_dir) / default_name).string() : o.output;
  const fs::path parent = fs::path(p).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    require(!ec, ErrorCode::kIo, "cannot create directory " + parent.string());
  }
  return p;
}

/// Path next to `primary` with its extension replaced by `suffix`.
std::string sibling(const std::string& primary, const std::string& suffix) {
  fs::path p(primary);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::vector<ContainerKind> scenariosOf(const RunConfig& cfg, const CommandOptions& o) {
  if (!o.scenario.empty()) return {parseScenario(o.scenario)};
  return cfg.scenarios;
}

Split splitOf(const CommandOptions& o, Split fallback) { return o.split.empty() ? fallback : parseSplit(o.split); }

ModuleKind moduleOf(const CommandOptions& o) {
  require(!o.module.empty(), ErrorCode::kConfig, "--module is required (retrieve, place, pick)");
  return parseModule(o.module);
}

ModelArch archFor(ModuleKind kind, const RunConfig& cfg) {
  ModelArch a = ModelArch::defaults(kind);
  a.encoder.num_points = cfg.env.num_points;
  return a;
}

void saveModel(const std::string& path, const ModelF& m, const RunConfig& cfg, std::uint64_t seed) {
  writeFile(path, saveCheckpoint(m, {cfg.hash(), seed}));
}

Dataset loadDatasetFile(const std::string& path) {
  require(!path.empty(), ErrorCode::kConfig, "--dataset is required");
  return decodeDataset(readFile(path));
}

struct LoadedModels {
  std::optional<ModelF> retrieve, place, pick;
  PolicyModels view() const {
    return {retrieve ? &*retrieve : nullptr, place ? &*place : nullptr, pick ? &*pick : nullptr};
  }
};

LoadedModels loadModels(const RunConfig& cfg, const CommandOptions& o) {
  LoadedModels m;
  if (!o.retrieve_ckpt.empty()) m.retrieve = loadModelChecked(o.retrieve_ckpt, ModuleKind::kRetrieve, cfg);
  if (!o.place_ckpt.empty()) m.place = loadModelChecked(o.place_ckpt, ModuleKind::kPlace, cfg);
  if (!o.pick_ckpt.empty()) m.pick = loadModelChecked(o.pick_ckpt, ModuleKind::kPick, cfg);
  return m;
}

void requireModels(const LoadedModels& m, Method method) {
  const PolicyConfig p = policyFor(method, PolicyConfig{});
  const bool learned = p.retrieve == Chooser::kLearned;
  require(!learned || m.retrieve, ErrorCode::kConfig, std::string(methodName(method)) + " needs --retrieve");
  const bool adapts = learned && p.max_adapt_rounds > 0;
  require(!adapts || p.pick != Chooser::kLearned || m.pick, ErrorCode::kConfig,
          std::string(methodName(method)) + " needs --pick");
  require(!adapts || p.place != Chooser::kLearned || m.place, ErrorCode::kConfig,
          std::string(methodName(method)) + " needs --place");
}

/// Scene from a snapshot file, or generated from (scenario, scene seed).
SceneState sceneOf(SceneCache& cache, const RunConfig& cfg, const CommandOptions& o, std::uint64_t* seed_out) {
  if (!o.input.empty()) {
    if (seed_out) *seed_out = o.scene_seed.value_or(0);
    return restore(readFile(o.input));
  }
  const ContainerKind k = scenariosOf(cfg, o).front();
  const std::uint64_t seed = o.scene_seed.value_or(mixSeed(cfg.seed, 0x5eed));
  if (seed_out) *seed_out = seed;
  return cache.get(k, splitOf(o, Split::kSeen), seed);
}

}  // namespace

ModelF loadModelChecked(const std::string& path, ModuleKind expected, const RunConfig& cfg) {
  CheckpointMeta meta;
  ModelF m = loadCheckpoint(readFile(path), &meta);
  require(m.kind() == expected, ErrorCode::kConfig,
          path + " holds a " + moduleName(m.kind()) + " model, expected " + moduleName(expected));
  require(m.arch().encoder.num_points == cfg.env.num_points, ErrorCode::kConfig,
          path + ": checkpoint expects " + std::to_string(m.arch().encoder.num_points) + " points, config has " +
              std::to_string(cfg.env.num_points));
  if (meta.config_hash != cfg.hash()) {
    logInfo(path + " was trained under config " + meta.config_hash + " (current " + cfg.hash() + ")");
  }
  return m;
}

std::string cmdGenScenes(const RunConfig& cfg, const CommandOptions& o) {
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  const Split split = splitOf(o, Split::kSeen);
  const int count = o.count >= 0 ? static_cast<int>(o.count) : cfg.eval.num_scenes;
  const std::uint64_t seed = o.seed.value_or(cfg.eval.seed);
  const std::string dir = o.output.empty() ? (fs::path(cfg.output_dir) / "scenes").string() : o.output;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create directory " + dir);
  std::ostringstream manifest;
  manifest << "# config_hash=" << cfg.hash() << " seed=" << seed << "\nfile,scenario,split,scene_seed,garments\n";
  int written = 0;
  for (ContainerKind k : scenariosOf(cfg, o)) {
    for (const SceneRef& ref : evalScenes(cache, k, split, count, seed)) {
      const SceneState s = cache.get(ref.scenario, split, ref.scene_seed);
      const std::string name =
          std::string(scenarioName(k)) + "_" + splitName(split) + "_" + hexDigest(ref.scene_seed) + ".pile";
      writeFile((fs::path(dir) / name).string(), snapshot(s));
      manifest << name << ',' << scenarioName(k) << ',' << splitName(split) << ',' << ref.scene_seed << ','
               << s.garments.size() << '\n';
      ++written;
    }
  }
  writeFile((fs::path(dir) / "scenes.csv").string(), manifest.str());
  return "wrote " + std::to_string(written) + " scenes to " + dir;
}

std::string cmdCollect(const RunConfig& cfg, const CommandOptions& o) {
  const ModuleKind kind = moduleOf(o);
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  CollectConfig cc = cfg.collect;
  cc.scenarios = scenariosOf(cfg, o);
  cc.split = splitOf(o, cfg.collect.split);
  cc.seed = o.seed.value_or(mixSeed(cfg.seed, 0xc011 + static_cast<std::uint64_t>(kind)));
  cc.config_hash = cfg.hash();
  cc.high_score_threshold = cfg.policy.high_score_threshold;
  const std::size_t defaults[] = {cfg.counts.retrieve, cfg.counts.place, cfg.counts.pick};
  cc.target_count = o.count >= 0 ? static_cast<std::size_t>(o.count) : defaults[static_cast<int>(kind)];
  Dataset d;
  if (kind == ModuleKind::kRetrieve) {
    d = collectRetrievalData(cache, cc);
  } else {
    require(!o.retrieve_ckpt.empty(), ErrorCode::kConfig,
            std::string("collecting ") + moduleName(kind) + " data needs a retrieval checkpoint (--retrieve)");
    const ModelF retrieval = loadModelChecked(o.retrieve_ckpt, ModuleKind::kRetrieve, cfg);
    if (kind == ModuleKind::kPlace) {
      d = collectPlaceData(cache, cc, retrieval);
    } else {
      require(!o.place_ckpt.empty(), ErrorCode::kConfig, "collecting pick data needs a place checkpoint (--place)");
      const ModelF place = loadModelChecked(o.place_ckpt, ModuleKind::kPlace, cfg);
      d = collectPickData(cache, cc, retrieval, place);
    }
  }
  const std::string path = outPath(cfg, o, std::string(moduleName(kind)) + ".affd");
  writeFile(path, encodeDataset(d));
  const auto c = d.labelCounts();
  return std::string(moduleName(kind)) + " dataset: " + std::to_string(d.samples.size()) + " samples (" +
         std::to_string(c[1]) + " positive) -> " + path;
}

std::string cmdTrain(const RunConfig& cfg, const CommandOptions& o) {
  const ModuleKind kind = moduleOf(o);
  const Dataset d = loadDatasetFile(o.dataset);
  TrainConfig tc;
  const int epochs[] = {cfg.train.retrieve_epochs, cfg.train.place_epochs, cfg.train.pick_epochs};
  const int batches[] = {cfg.train.retrieve_batch, cfg.train.place_batch, cfg.train.pick_batch};
  tc.epochs = o.epochs >= 0 ? static_cast<int>(o.epochs) : epochs[static_cast<int>(kind)];
  tc.batch_size = batches[static_cast<int>(kind)];
  tc.seed = o.seed.value_or(mixSeed(cfg.seed, 0x7a1 + static_cast<std::uint64_t>(kind)));
  tc.adam = cfg.train.adam;
  tc.holdout_fraction = cfg.train.holdout_fraction;
  const TrainResult r = trainModule(kind, d, archFor(kind, cfg), tc);
  const std::string path = outPath(cfg, o, std::string(moduleName(kind)) + ".aff1");
  saveModel(path, r.model, cfg, tc.seed);
  const std::string curve = sibling(path, "_loss.csv");
  writeFile(curve, "# config_hash=" + cfg.hash() + " seed=" + std::to_string(tc.seed) + "\n" + r.curveCsv());
  std::ostringstream os;
  os << moduleName(kind) << " model -> " << path << " (loss curve " << curve << ")";
  if (!r.curve.empty()) {
    const EpochStats& e = r.curve.back();
    os << "; final train loss " << e.train_loss << ", held-out loss " << e.holdout_loss << ", held-out accuracy "
       << e.holdout_accuracy;
  }
  return os.str();
}

std::string cmdOnlineTune(const RunConfig& cfg, const CommandOptions& o) {
  const ModuleKind kind = moduleOf(o);
  const Dataset d = loadDatasetFile(o.dataset);
  LoadedModels m = loadModels(cfg, o);
  const std::optional<ModelF>* own[] = {&m.retrieve, &m.place, &m.pick};
  require(own[static_cast<int>(kind)]->has_value(), ErrorCode::kConfig,
          std::string("online-tune needs the ") + moduleName(kind) + " checkpoint to tune");
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  FinetuneConfig fc = cfg.finetune;
  fc.scenarios = scenariosOf(cfg, o);
  fc.split = splitOf(o, cfg.finetune.split);
  fc.seed = o.seed.value_or(mixSeed(cfg.seed, 0x0f7 + static_cast<std::uint64_t>(kind)));
  fc.delta = cfg.collect.delta;
  fc.statistic = cfg.collect.statistic;
  fc.high_score_threshold = cfg.policy.high_score_threshold;
  if (o.count >= 0) fc.max_iterations = static_cast<int>(o.count);
  const PolicyModels v = m.view();
  const FinetuneResult r = onlineFinetune(kind, **own[static_cast<int>(kind)], d, cache, fc, v.retrieve, v.place,
                                          kind == ModuleKind::kPick ? nullptr : v.pick);
  const std::string path = outPath(cfg, o, std::string(moduleName(kind)) + "_tuned.aff1");
  saveModel(path, r.model, cfg, fc.seed);
  std::ostringstream os;
  os << moduleName(kind) << " tuned -> " << path << ": " << r.episodes << " episodes, " << r.failures
     << " failures, " << r.updates << " updates, " << (r.converged ? "converged" : "iteration cap reached");
  return os.str();
}

std::string cmdEval(const RunConfig& cfg, const CommandOptions& o) {
  const Method method = parseMethod(o.method);
  const Split split = splitOf(o, Split::kSeen);
  LoadedModels m = loadModels(cfg, o);
  requireModels(m, method);
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  const int n = o.count >= 0 ? static_cast<int>(o.count) : cfg.eval.num_scenes;
  require(n > 0, ErrorCode::kConfig, "number of evaluation scenes must be > 0");
  const std::uint64_t seed = o.seed.value_or(cfg.eval.seed);
  std::vector<SceneRef> refs;
  for (ContainerKind k : scenariosOf(cfg, o)) {
    const auto part = evalScenes(cache, k, split, n, seed);
    refs.insert(refs.end(), part.begin(), part.end());
  }
  if (o.low_p_high_only) {
    require(m.retrieve.has_value(), ErrorCode::kConfig, "--low-p-high needs --retrieve");
    refs = lowPHighScenes(cache, refs, split, *m.retrieve, cfg.policy);
    require(!refs.empty(), ErrorCode::kIncomplete, "no evaluation scene passes the P_high filter");
  }
  const EvalReport rep = evaluateScenes(m.view(), cache, refs, split, policyFor(method, cfg.policy),
                                        methodName(method), cfg.hash(), seed);
  const std::string path = outPath(cfg, o, std::string("eval_") + methodName(method) + "_" + splitName(split) + ".csv");
  writeFile(path, rep.toCsv());
  writeFile(sibling(path, ".txt"), rep.summary());
  std::string logs;
  for (const EpisodeLog& l : rep.episodes) logs += l.toText();
  writeFile(sibling(path, "_episodes.log"), logs);
  return rep.summary() + "report -> " + path;
}

std::string cmdSweepRounds(const RunConfig& cfg, const CommandOptions& o) {
  LoadedModels m = loadModels(cfg, o);
  requireModels(m, Method::kFull);
  const Split split = splitOf(o, Split::kSeen);
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  const int n = o.count >= 0 ? static_cast<int>(o.count) : cfg.eval.num_scenes;
  const std::uint64_t seed = o.seed.value_or(cfg.eval.seed);
  std::vector<SceneRef> refs;
  for (ContainerKind k : scenariosOf(cfg, o)) {
    const auto part = evalScenes(cache, k, split, n, seed);
    refs.insert(refs.end(), part.begin(), part.end());
  }
  if (o.low_p_high_only) refs = lowPHighScenes(cache, refs, split, *m.retrieve, cfg.policy);
  require(!refs.empty(), ErrorCode::kIncomplete, "no scenes to sweep");
  const auto rows = adaptationRoundSweep(m.view(), cache, refs, split, cfg.policy, cfg.hash(), seed);
  const std::string path = outPath(cfg, o, "sweep_rounds.csv");
  const std::string csv = sweepCsv(rows, cfg.hash(), seed);
  writeFile(path, csv);
  return csv + "sweep -> " + path;
}

std::string cmdOracle(const RunConfig& cfg, const CommandOptions& o) {
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  std::uint64_t scene_seed = 0;
  const SceneState s = sceneOf(cache, cfg, o, &scene_seed);
  const PointCloudObs obs = observe(cfg.env, s);
  const std::int64_t n = o.count >= 0 ? o.count : 64;
  require(n > 0 && n <= 64, ErrorCode::kConfig, "oracle candidate count must lie in [1, 64]");
  const auto fps = farthestPointSample(obs.points, static_cast<std::size_t>(n), 0);
  const std::vector<int> cands(fps.begin(), fps.end());
  const auto ok = bruteForceOracle(s, cfg.env, obs, cands);
  std::ostringstream os;
  os << "# config_hash=" << cfg.hash() << " scene_seed=" << scene_seed << "\nindex,x,y,z,success\n";
  for (int c : cands) {
    const Vec3& p = obs.points[static_cast<std::size_t>(c)];
    os << c << ',' << p.x << ',' << p.y << ',' << p.z << ','
       << (std::find(ok.begin(), ok.end(), c) != ok.end() ? 1 : 0) << '\n';
  }
  const std::string path = outPath(cfg, o, "oracle.csv");
  writeFile(path, os.str());
  return std::to_string(ok.size()) + " of " + std::to_string(cands.size()) + " candidates succeed -> " + path;
}

std::string cmdExportAffordance(const RunConfig& cfg, const CommandOptions& o) {
  const ModuleKind kind = moduleOf(o);
  LoadedModels m = loadModels(cfg, o);
  const std::optional<ModelF>* own[] = {&m.retrieve, &m.place, &m.pick};
  require(own[static_cast<int>(kind)]->has_value(), ErrorCode::kConfig,
          std::string("export needs the ") + moduleName(kind) + " checkpoint");
  const ModelF& model = **own[static_cast<int>(kind)];
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  std::uint64_t scene_seed = 0;
  const SceneState s = sceneOf(cache, cfg, o, &scene_seed);
  const PointCloudObs obs = observe(cfg.env, s);
  Cloud points = obs.points;
  std::vector<double> scores;
  if (kind == ModuleKind::kPlace) {
    const int pick = o.pick_index >= 0 ? o.pick_index
                     : m.pick      ? static_cast<int>(argmaxIndex(m.pick->score(obs.points, obs.points)))
                                   : 0;
    require(pick < static_cast<int>(obs.points.size()), ErrorCode::kConfig, "pick index out of range");
    points = placeCandidates(cfg.env, s.container.kind, obs.points);
    scores = model.score(obs.points, points, pick);
  } else {
    scores = model.score(obs.points, obs.points);
  }
  const std::string path = outPath(cfg, o, std::string("affordance_") + moduleName(kind) + ".ply");
  exportAffordance(path, points, scores, cfg.hash(), scene_seed);
  return std::to_string(points.size()) + " points -> " + path;
}

std::string cmdRunEpisode(const RunConfig& cfg, const CommandOptions& o) {
  const Method method = parseMethod(o.method);
  LoadedModels m = loadModels(cfg, o);
  requireModels(m, method);
  TemplatePool pool = defaultTemplatePool();
  SceneCache cache(cfg.env, pool);
  std::uint64_t scene_seed = 0;
  const SceneState s = sceneOf(cache, cfg, o, &scene_seed);
  PolicyConfig pc = policyFor(method, cfg.policy);
  if (o.seed) pc.seed = *o.seed;
  const EpisodeLog log = runEpisode(m.view(), s, cfg.env, pc, scene_seed);
  const std::string path = outPath(cfg, o, "episode.log");
  writeFile(path, "# config_hash=" + cfg.hash() + "\n" + log.toText());
  if (log.incomplete) fail(ErrorCode::kIncomplete, "episode hit its action budget; log -> " + path);
  return log.toText() + "log -> " + path;
}

}  // namespace pileaff
