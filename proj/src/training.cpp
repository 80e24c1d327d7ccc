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

#include "pileaff/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "pileaff/bytes.hpp"
#include "pileaff/log.hpp"

namespace pileaff {

// ---------------------------------------------------------------------------------------------
// Dataset

std::array<std::uint64_t, 2> Dataset::labelCounts() const {
  std::array<std::uint64_t, 2> c{0, 0};
  for (const Sample& s : samples) ++c[s.label ? 1 : 0];
  return c;
}

std::vector<std::uint64_t> Dataset::sceneSeeds() const {
  std::vector<std::uint64_t> out;
  std::set<std::uint64_t> seen;
  for (const Sample& s : samples) {
    if (seen.insert(s.scene_seed).second) out.push_back(s.scene_seed);
  }
  return out;
}

namespace {

constexpr std::uint32_t kDatasetVersion = 2;

std::shared_ptr<const Cloud> roundedCloud(const Cloud& c) {
  auto out = std::make_shared<Cloud>(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    (*out)[i] = {static_cast<float>(c[i].x), static_cast<float>(c[i].y), static_cast<float>(c[i].z)};
  }
  return out;
}

void checkSample(const Dataset& d, const Sample& s) {
  require(s.cloud != nullptr && !s.cloud->empty(), ErrorCode::kFormat, "sample without points");
  const auto n = static_cast<std::int64_t>(s.cloud->size());
  std::int64_t limit = n;
  if (s.kind == ModuleKind::kPlace) {
    limit += static_cast<std::int64_t>(supportLattice(makeContainer(s.scenario), d.lattice_spacing).size());
    require(s.pick_index >= 0 && s.pick_index < n, ErrorCode::kFormat, "place sample pick index out of range");
  }
  require(s.query_index >= 0 && s.query_index < limit, ErrorCode::kFormat, "sample query index out of range");
  require(s.label <= 1, ErrorCode::kFormat, "sample label must be 0 or 1");
  require(s.kind == d.kind, ErrorCode::kFormat, "sample kind differs from the dataset kind");
}

}  // namespace

std::string encodeDataset(const Dataset& d) {
  ByteWriter w;
  w.putBytes("AFFD");
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(d.kind));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(d.split));
  w.put<std::uint64_t>(d.seed);
  w.putString(d.config_hash);
  w.put<double>(d.lattice_spacing);
  w.put<double>(d.delta);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(d.statistic));
  const auto counts = d.labelCounts();
  w.put<std::uint64_t>(d.samples.size());
  w.put<std::uint64_t>(counts[0]);
  w.put<std::uint64_t>(counts[1]);
  const auto seeds = d.sceneSeeds();
  w.put<std::uint64_t>(seeds.size());
  for (auto s : seeds) w.put<std::uint64_t>(s);
  std::vector<float> coords;
  for (const Sample& s : d.samples) {
    checkSample(d, s);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.kind));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.scenario));
    w.put<std::uint64_t>(s.scene_seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.cloud->size()));
    coords.resize(s.cloud->size() * 3);
    for (std::size_t i = 0; i < s.cloud->size(); ++i) {
      coords[3 * i] = static_cast<float>((*s.cloud)[i].x);
      coords[3 * i + 1] = static_cast<float>((*s.cloud)[i].y);
      coords[3 * i + 2] = static_cast<float>((*s.cloud)[i].z);
    }
    w.putArray(std::span<const float>(coords));
    w.put<std::int32_t>(s.query_index);
    w.put<std::int32_t>(s.pick_index);
    w.put<std::uint8_t>(s.label);
  }
  return w.take();
}

Dataset decodeDataset(std::string_view blob) {
  ByteReader r(blob);
  require(r.getBytes(4) == "AFFD", ErrorCode::kFormat, "not an AFFD dataset");
  const auto version = r.get<std::uint32_t>();
  require(version == kDatasetVersion, ErrorCode::kFormat, "unsupported dataset version " + std::to_string(version));
  Dataset d;
  const auto kind = r.get<std::uint8_t>();
  require(kind <= 2, ErrorCode::kFormat, "unknown dataset kind");
  d.kind = static_cast<ModuleKind>(kind);
  const auto split = r.get<std::uint8_t>();
  require(split <= 2, ErrorCode::kFormat, "unknown dataset split");
  d.split = static_cast<Split>(split);
  d.seed = r.get<std::uint64_t>();
  d.config_hash = r.getString();
  d.lattice_spacing = r.get<double>();
  require(d.lattice_spacing > 0.0, ErrorCode::kFormat, "dataset lattice spacing must be > 0");
  d.delta = r.get<double>();
  const auto statistic = r.get<std::uint8_t>();
  require(statistic <= 1, ErrorCode::kFormat, "unknown dataset label statistic");
  d.statistic = static_cast<LabelStatistic>(statistic);
  const auto count = r.get<std::uint64_t>();
  const auto negatives = r.get<std::uint64_t>();
  const auto positives = r.get<std::uint64_t>();
  const auto num_seeds = r.get<std::uint64_t>();
  require(num_seeds <= count, ErrorCode::kFormat, "more scene seeds than samples");
  std::vector<std::uint64_t> seeds(num_seeds);
  for (auto& s : seeds) s = r.get<std::uint64_t>();
  require(count <= r.remaining(), ErrorCode::kFormat, "implausible sample count");
  d.samples.reserve(count);
  std::vector<float> coords;
  for (std::uint64_t k = 0; k < count; ++k) {
    Sample s;
    const auto sk = r.get<std::uint8_t>();
    require(sk <= 2, ErrorCode::kFormat, "unknown sample kind");
    s.kind = static_cast<ModuleKind>(sk);
    const auto sc = r.get<std::uint8_t>();
    require(sc <= 2, ErrorCode::kFormat, "unknown sample scenario");
    s.scenario = static_cast<ContainerKind>(sc);
    s.scene_seed = r.get<std::uint64_t>();
    const auto n = r.get<std::uint32_t>();
    require(n > 0 && n <= r.remaining() / 12, ErrorCode::kFormat, "implausible point count");
    coords.resize(static_cast<std::size_t>(n) * 3);
    r.getArray(std::span<float>(coords));
    // Consecutive samples of one observation share storage.
    bool same = !d.samples.empty() && d.samples.back().cloud->size() == n;
    if (same) {
      const Cloud& prev = *d.samples.back().cloud;
      for (std::uint32_t i = 0; i < n && same; ++i) {
        same = prev[i].x == coords[3 * i] && prev[i].y == coords[3 * i + 1] && prev[i].z == coords[3 * i + 2];
      }
    }
    if (same) {
      s.cloud = d.samples.back().cloud;
    } else {
      auto c = std::make_shared<Cloud>(n);
      for (std::uint32_t i = 0; i < n; ++i) (*c)[i] = {coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]};
      s.cloud = std::move(c);
    }
    s.query_index = r.get<std::int32_t>();
    s.pick_index = r.get<std::int32_t>();
    s.label = r.get<std::uint8_t>();
    checkSample(d, s);
    d.samples.push_back(std::move(s));
  }
  require(r.atEnd(), ErrorCode::kFormat, "trailing bytes after dataset");
  const auto counts = d.labelCounts();
  require(counts[0] == negatives && counts[1] == positives, ErrorCode::kFormat,
          "manifest label counts do not match the samples");
  require(d.sceneSeeds() == seeds, ErrorCode::kFormat, "manifest scene seeds do not match the samples");
  return d;
}

Vec3 queryPoint(const Dataset& d, const Sample& s) {
  const auto n = static_cast<std::int32_t>(s.cloud->size());
  if (s.query_index < n) return (*s.cloud)[static_cast<std::size_t>(s.query_index)];
  const auto lattice = supportLattice(makeContainer(s.scenario), d.lattice_spacing);
  return lattice.at(static_cast<std::size_t>(s.query_index - n));
}

// ---------------------------------------------------------------------------------------------
// Collection

void CollectConfig::validate() const {
  require(target_count > 0, ErrorCode::kConfig, "target_count must be > 0");
  require(!scenarios.empty(), ErrorCode::kConfig, "no scenarios selected");
  require(queries_per_scene > 0 && picks_per_scene > 0 && places_per_pick > 0, ErrorCode::kConfig,
          "per-scene query counts must be > 0");
  require(delta >= 0.0, ErrorCode::kConfig, "improvement margin must be >= 0");
  require(min_class_fraction >= 0.0 && min_class_fraction <= 0.5, ErrorCode::kConfig,
          "min_class_fraction must lie in [0, 0.5]");
  require(budget_factor >= 1.0, ErrorCode::kConfig, "budget_factor must be >= 1");
  require(high_score_threshold > 0.0 && high_score_threshold < 1.0, ErrorCode::kConfig,
          "high_score_threshold must lie in (0, 1)");
}

int improvementLabel(double before, double after, double delta) { return after - before >= delta ? 1 : 0; }

const char* labelStatisticName(LabelStatistic s) {
  return s == LabelStatistic::kPHigh ? "p_high" : "mean_affordance";
}

LabelStatistic parseLabelStatistic(const std::string& name) {
  if (name == "p_high") return LabelStatistic::kPHigh;
  if (name == "mean_affordance") return LabelStatistic::kMeanAffordance;
  fail(ErrorCode::kConfig, "unknown label statistic '" + name + "' (p_high or mean_affordance)");
}

double labelStatistic(const std::vector<double>& map, LabelStatistic s, double high_score_threshold) {
  if (s == LabelStatistic::kPHigh) return pHigh(map, high_score_threshold);
  require(!map.empty(), ErrorCode::kInvalidParameter, "mean of an empty map");
  double sum = 0.0;
  for (double v : map) sum += v;
  return sum / static_cast<double>(map.size());
}

namespace {

/// Keeps each class under target - ceil(min_fraction * target) so the rarer class reaches its share.
class Balancer {
 public:
  Balancer(const CollectConfig& c)
      : target_(c.target_count),
        cap_(c.target_count - static_cast<std::size_t>(std::ceil(c.min_class_fraction * c.target_count))),
        budget_(static_cast<std::size_t>(std::ceil(c.budget_factor * c.target_count))),
        seed_(c.seed) {
    cap_ = std::max<std::size_t>(cap_, 1);
  }

  bool done() const { return counts_[0] + counts_[1] >= target_; }
  /// Counts one rollout; throws once the budget is spent with the target unmet.
  void rollout() {
    if (rollouts_ >= budget_) {
      std::ostringstream os;
      os << "class starvation: " << rollouts_ << " rollouts gave " << counts_[0] << " negatives and " << counts_[1]
         << " positives of " << target_ << " (seed " << seed_ << ")";
      fail(ErrorCode::kIncomplete, os.str());
    }
    ++rollouts_;
  }
  bool accept(int label) {
    if (counts_[label] >= cap_) return false;
    ++counts_[label];
    return true;
  }
  std::size_t rollouts() const { return rollouts_; }

 private:
  std::size_t target_, cap_, budget_;
  std::uint64_t seed_;
  std::size_t counts_[2] = {0, 0};
  std::size_t rollouts_ = 0;
};

/// k distinct indices in [0, n), drawn in order by partial Fisher-Yates.
std::vector<int> distinctIndices(Rng& rng, std::size_t n, int k) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  const std::size_t m = std::min(n, static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniformIndex(rng, n - i)]);
  idx.resize(m);
  return idx;
}

int retrievalRollout(const std::string& snap, const EnvConfig& env, const Vec3& point) {
  SceneState w = restore(snap);
  const RetrievalAction a = makeRetrievalAction(w.container, point, env.motion);
  return executeRetrieval(w, a, env.sim, env.thresholds, env.motion).outcome.success ? 1 : 0;
}

/// Pick-place then relabel by the retrieval-map improvement. A grasp miss leaves the scene as is.
int improvementRollout(const std::string& snap, const EnvConfig& env, const ModelF& retrieval, const Vec3& pick,
                       const Vec3& place, double p0, LabelStatistic stat, double threshold, double delta) {
  SceneState w = restore(snap);
  const PickPlaceAction a = makePickPlaceAction(pick, place, env.motion);
  double p1 = p0;
  if (executePickPlace(w, a, env.sim, env.thresholds, env.motion)) {
    const PointCloudObs after = observe(env, w);
    p1 = labelStatistic(retrieval.score(after.points, after.points), stat, threshold);
  }
  return improvementLabel(p0, p1, delta);
}

struct SceneVisit {
  SceneRef ref;
  SceneState state;
  PointCloudObs obs;
  std::string snap;
};

/// Walks the scene stream, skipping seeds whose scene cannot be generated.
template <typename Fn>
void forEachScene(SceneCache& scenes, const CollectConfig& c, Balancer& bal, Fn&& fn) {
  int skipped = 0;
  for (std::uint64_t i = 0; !bal.done(); ++i) {
    SceneVisit v;
    v.ref = sceneAt(c.scenarios, c.seed, i);
    try {
      v.state = scenes.get(v.ref.scenario, c.split, v.ref.scene_seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSceneGeneration) throw;
      logWarn(std::string("skipping scene: ") + e.what());
      require(++skipped <= 100 + static_cast<int>(i / 10), ErrorCode::kSceneGeneration,
              "too many scene generation failures");
      continue;
    }
    v.obs = observe(scenes.env(), v.state);
    v.snap = snapshot(v.state);
    fn(v);
  }
}

Dataset emptyDataset(ModuleKind kind, const SceneCache& scenes, const CollectConfig& c) {
  c.validate();
  scenes.env().validate();
  if (kind != ModuleKind::kRetrieve && c.delta == 0.0) {
    logWarn("improvement margin is 0: labels are dominated by simulation noise");
  }
  Dataset d;
  d.kind = kind;
  d.split = c.split;
  d.seed = c.seed;
  d.config_hash = c.config_hash;
  d.lattice_spacing = scenes.env().lattice_spacing;
  d.delta = kind == ModuleKind::kRetrieve ? 0.0 : c.delta;
  d.statistic = c.statistic;
  return d;
}

void logCollected(const Dataset& d, const Balancer& bal) {
  const auto c = d.labelCounts();
  std::ostringstream os;
  os << moduleName(d.kind) << " data: " << d.samples.size() << " samples (" << c[1] << " positive) from "
     << bal.rollouts() << " rollouts over " << d.sceneSeeds().size() << " scenes";
  logInfo(os.str());
}

}  // namespace

Dataset collectRetrievalData(SceneCache& scenes, const CollectConfig& config) {
  Dataset d = emptyDataset(ModuleKind::kRetrieve, scenes, config);
  Balancer bal(config);
  const EnvConfig& env = scenes.env();
  forEachScene(scenes, config, bal, [&](SceneVisit& v) {
    Rng rng(mixSeed(v.ref.scene_seed, 0x9e7));
    const auto cloud = roundedCloud(v.obs.points);
    for (int q : distinctIndices(rng, v.obs.size(), config.queries_per_scene)) {
      if (bal.done()) break;
      bal.rollout();
      const int label = retrievalRollout(v.snap, env, v.obs.points[static_cast<std::size_t>(q)]);
      if (!bal.accept(label)) continue;
      d.samples.push_back({ModuleKind::kRetrieve, v.ref.scenario, v.ref.scene_seed, cloud, q, -1,
                           static_cast<std::uint8_t>(label)});
    }
  });
  logCollected(d, bal);
  return d;
}

Dataset collectPlaceData(SceneCache& scenes, const CollectConfig& config, const ModelF& retrieval) {
  require(retrieval.kind() == ModuleKind::kRetrieve, ErrorCode::kConfig, "place collection needs a retrieval model");
  Dataset d = emptyDataset(ModuleKind::kPlace, scenes, config);
  Balancer bal(config);
  const EnvConfig& env = scenes.env();
  forEachScene(scenes, config, bal, [&](SceneVisit& v) {
    Rng rng(mixSeed(v.ref.scene_seed, 0x91ace));
    const auto cloud = roundedCloud(v.obs.points);
    const double p0 =
        labelStatistic(retrieval.score(v.obs.points, v.obs.points), config.statistic, config.high_score_threshold);
    const auto cands = placeCandidates(env, v.ref.scenario, v.obs.points);
    for (int pick : distinctIndices(rng, v.obs.size(), config.picks_per_scene)) {
      for (int place : distinctIndices(rng, cands.size(), config.places_per_pick)) {
        if (bal.done()) return;
        bal.rollout();
        const int label = improvementRollout(v.snap, env, retrieval, v.obs.points[static_cast<std::size_t>(pick)],
                                             cands[static_cast<std::size_t>(place)], p0, config.statistic,
                                             config.high_score_threshold, config.delta);
        if (!bal.accept(label)) continue;
        d.samples.push_back({ModuleKind::kPlace, v.ref.scenario, v.ref.scene_seed, cloud, place, pick,
                             static_cast<std::uint8_t>(label)});
      }
    }
  });
  logCollected(d, bal);
  return d;
}

Dataset collectPickData(SceneCache& scenes, const CollectConfig& config, const ModelF& retrieval,
                        const ModelF& place) {
  require(retrieval.kind() == ModuleKind::kRetrieve, ErrorCode::kConfig, "pick collection needs a retrieval model");
  require(place.kind() == ModuleKind::kPlace, ErrorCode::kConfig, "pick collection needs a place model");
  Dataset d = emptyDataset(ModuleKind::kPick, scenes, config);
  Balancer bal(config);
  const EnvConfig& env = scenes.env();
  forEachScene(scenes, config, bal, [&](SceneVisit& v) {
    Rng rng(mixSeed(v.ref.scene_seed, 0x41c));
    const auto cloud = roundedCloud(v.obs.points);
    const double p0 =
        labelStatistic(retrieval.score(v.obs.points, v.obs.points), config.statistic, config.high_score_threshold);
    const auto cands = placeCandidates(env, v.ref.scenario, v.obs.points);
    for (int pick : distinctIndices(rng, v.obs.size(), config.queries_per_scene)) {
      if (bal.done()) return;
      bal.rollout();
      const auto best = argmaxIndex(place.score(v.obs.points, cands, pick));
      const int label = improvementRollout(v.snap, env, retrieval, v.obs.points[static_cast<std::size_t>(pick)],
                                           cands[best], p0, config.statistic, config.high_score_threshold,
                                           config.delta);
      if (!bal.accept(label)) continue;
      d.samples.push_back({ModuleKind::kPick, v.ref.scenario, v.ref.scene_seed, cloud, pick, -1,
                           static_cast<std::uint8_t>(label)});
    }
  });
  logCollected(d, bal);
  return d;
}

int relabel(SceneCache& scenes, const Dataset& d, const Sample& s, const ModelF* retrieval, const ModelF* place,
            double high_score_threshold) {
  const EnvConfig& env = scenes.env();
  const SceneState state = scenes.get(s.scenario, d.split, s.scene_seed);
  const PointCloudObs obs = observe(env, state);
  const std::string snap = snapshot(state);
  const auto q = static_cast<std::size_t>(s.query_index);
  if (s.kind == ModuleKind::kRetrieve) return retrievalRollout(snap, env, obs.points.at(q));
  require(retrieval != nullptr, ErrorCode::kConfig, "relabelling needs the retrieval model");
  const double p0 = labelStatistic(retrieval->score(obs.points, obs.points), d.statistic, high_score_threshold);
  const auto cands = placeCandidates(env, s.scenario, obs.points);
  if (s.kind == ModuleKind::kPlace) {
    return improvementRollout(snap, env, *retrieval, obs.points.at(static_cast<std::size_t>(s.pick_index)),
                              cands.at(q), p0, d.statistic, high_score_threshold, d.delta);
  }
  require(place != nullptr, ErrorCode::kConfig, "relabelling pick samples needs the place model");
  const auto best = argmaxIndex(place->score(obs.points, cands, s.query_index));
  return improvementRollout(snap, env, *retrieval, obs.points.at(q), cands[best], p0, d.statistic, high_score_threshold,
                            d.delta);
}

Dataset makeHeightDataset(SceneCache& scenes, const std::vector<ContainerKind>& scenarios, int num_scenes,
                          int queries_per_scene, std::uint64_t seed) {
  require(num_scenes > 0 && queries_per_scene > 0, ErrorCode::kConfig, "scene and query counts must be > 0");
  Dataset d;
  d.kind = ModuleKind::kRetrieve;
  d.seed = seed;
  d.lattice_spacing = scenes.env().lattice_spacing;
  int made = 0;
  for (std::uint64_t i = 0; made < num_scenes; ++i) {
    require(i < static_cast<std::uint64_t>(num_scenes) * 4 + 20, ErrorCode::kSceneGeneration,
            "too many scene generation failures");
    const SceneRef ref = sceneAt(scenarios, seed, i);
    SceneState s;
    try {
      s = scenes.get(ref.scenario, Split::kSeen, ref.scene_seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSceneGeneration) throw;
      continue;
    }
    const auto cloud = roundedCloud(observe(scenes.env(), s).points);
    std::vector<double> z;
    for (const Vec3& p : *cloud) z.push_back(p.z);
    std::vector<double> sorted = z;
    const std::size_t cut = sorted.size() - std::max<std::size_t>(1, sorted.size() / 5);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
    const double threshold = sorted[cut];
    Rng rng(mixSeed(ref.scene_seed, 0x4e1));
    for (int q : distinctIndices(rng, cloud->size(), queries_per_scene)) {
      d.samples.push_back({ModuleKind::kRetrieve, ref.scenario, ref.scene_seed, cloud, q, -1,
                           static_cast<std::uint8_t>(z[static_cast<std::size_t>(q)] >= threshold ? 1 : 0)});
    }
    ++made;
  }
  return d;
}

// ---------------------------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  require(epochs >= 0, ErrorCode::kConfig, "epochs must be >= 0");
  require(batch_size > 0, ErrorCode::kConfig, "batch_size must be > 0");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorCode::kConfig,
          "holdout_fraction must lie in [0, 1)");
  require(adam.lr > 0.0 && adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
              adam.eps > 0.0,
          ErrorCode::kConfig, "invalid optimizer settings");
}

std::string TrainResult::curveCsv() const {
  std::ostringstream os;
  os << "epoch,train_loss,holdout_loss,holdout_accuracy\n";
  char buf[160];
  for (const EpochStats& e : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.6f\n", e.epoch, e.train_loss, e.holdout_loss, e.holdout_accuracy);
    os << buf;
  }
  return os.str();
}

std::vector<std::uint64_t> holdoutScenes(const Dataset& d, double fraction, std::uint64_t seed) {
  std::vector<std::uint64_t> scenes = d.sceneSeeds();
  std::sort(scenes.begin(), scenes.end());
  if (scenes.size() < 2 || fraction <= 0.0) return {};
  Rng rng(mixSeed(seed, 0x401d));
  for (std::size_t i = scenes.size(); i > 1; --i) std::swap(scenes[i - 1], scenes[uniformIndex(rng, i)]);
  const auto k = std::min(scenes.size() - 1,
                          std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * scenes.size()))));
  scenes.resize(k);
  std::sort(scenes.begin(), scenes.end());
  return scenes;
}

namespace {

/// Samples sharing an observation (and pick) become one network pass.
struct Group {
  std::vector<std::size_t> samples;
  TrainGroup tg;
  EncoderGeometry geometry;
};

std::vector<Group> makeGroups(const Dataset& d, const std::vector<std::size_t>& indices, const EncoderArch& arch,
                              bool place) {
  std::vector<Group> groups;
  std::map<std::pair<const Cloud*, int>, std::size_t> where;
  for (std::size_t i : indices) {
    const Sample& s = d.samples[i];
    const auto key = std::make_pair(s.cloud.get(), place ? s.pick_index : -1);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, groups.size()).first;
      groups.emplace_back();
      groups.back().tg.cloud = s.cloud.get();
      groups.back().tg.pick_index = key.second;
    }
    Group& g = groups[it->second];
    g.samples.push_back(i);
    g.tg.queries.push_back(queryPoint(d, s));
    g.tg.labels.push_back(s.label);
  }
  for (Group& g : groups) {
    std::vector<Vec3> q;
    if (place) q.push_back((*g.tg.cloud)[static_cast<std::size_t>(g.tg.pick_index)]);
    q.insert(q.end(), g.tg.queries.begin(), g.tg.queries.end());
    g.geometry = buildGeometry(*g.tg.cloud, q, arch);
  }
  return groups;
}

}  // namespace

EvalStats evaluateSamples(const ModelF& model, const Dataset& d, const std::vector<std::size_t>& indices) {
  EvalStats st;
  const bool place = model.kind() == ModuleKind::kPlace;
  std::map<std::pair<const Cloud*, int>, std::vector<std::size_t>> groups;
  for (std::size_t i : indices) groups[{d.samples[i].cloud.get(), place ? d.samples[i].pick_index : -1}].push_back(i);
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& [key, members] : groups) {
    std::vector<Vec3> q;
    for (std::size_t i : members) q.push_back(queryPoint(d, d.samples[i]));
    const auto scores = model.score(*key.first, q, key.second);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const int label = d.samples[members[k]].label;
      loss += bce(scores[k], label);
      correct += (scores[k] >= 0.5) == (label == 1) ? 1 : 0;
    }
  }
  st.count = indices.size();
  if (st.count > 0) {
    st.loss = loss / static_cast<double>(st.count);
    st.accuracy = static_cast<double>(correct) / static_cast<double>(st.count);
  }
  return st;
}

TrainResult trainModule(ModuleKind kind, const Dataset& dataset, const ModelArch& arch, const TrainConfig& config) {
  config.validate();
  require(dataset.kind == kind, ErrorCode::kConfig,
          std::string("dataset holds ") + moduleName(dataset.kind) + " samples, not " + moduleName(kind));
  require(!dataset.samples.empty(), ErrorCode::kInput, "empty dataset");
  const auto counts = dataset.labelCounts();
  require(counts[0] > 0 && counts[1] > 0, ErrorCode::kInput,
          "dataset holds a single class (" + std::to_string(counts[0]) + " negatives, " + std::to_string(counts[1]) +
              " positives); the head would collapse to a constant");
  TrainResult result;
  result.model = ModelF(kind, arch, mixSeed(config.seed, 0x1417));
  result.holdout_scenes = holdoutScenes(dataset, config.holdout_fraction, config.seed);
  const std::set<std::uint64_t> held(result.holdout_scenes.begin(), result.holdout_scenes.end());
  std::vector<std::size_t> train_idx, hold_idx;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (held.count(dataset.samples[i].scene_seed) ? hold_idx : train_idx).push_back(i);
  }
  if (config.epochs == 0) return result;
  const bool place = kind == ModuleKind::kPlace;
  std::vector<Group> groups = makeGroups(dataset, train_idx, arch.encoder, place);
  AdamState adam;
  std::vector<float> grad;
  ModelF& model = result.model;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mixSeed(config.seed, 0xe90c0000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniformIndex(rng, i)]);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::vector<TrainGroup> batch;
    std::vector<const EncoderGeometry*> geo;
    std::size_t in_batch = 0;
    auto flush = [&]() {
      if (batch.empty()) return;
      const double loss = lossAndGradient(model, batch, geo, grad);
      adamUpdate(model.params(), grad, adam, config.adam);
      loss_sum += loss * static_cast<double>(in_batch);
      seen += in_batch;
      batch.clear();
      geo.clear();
      in_batch = 0;
    };
    for (std::size_t gi : order) {
      batch.push_back(groups[gi].tg);
      geo.push_back(&groups[gi].geometry);
      in_batch += groups[gi].samples.size();
      if (in_batch >= static_cast<std::size_t>(config.batch_size)) flush();
    }
    flush();
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    if (hold_idx.empty()) {
      st.holdout_loss = std::numeric_limits<double>::quiet_NaN();
      st.holdout_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
      const EvalStats ev = evaluateSamples(model, dataset, hold_idx);
      st.holdout_loss = ev.loss;
      st.holdout_accuracy = ev.accuracy;
    }
    require(std::isfinite(st.train_loss), ErrorCode::kNumerical, "non-finite training loss");
    result.curve.push_back(st);
  }
  return result;
}

// ---------------------------------------------------------------------------------------------
// Online fine-tuning

bool HardExampleBuffer::push(Sample s) {
  if (items_.size() < kCapacity) items_.push_back(std::move(s));
  return full();
}

void FinetuneConfig::validate() const {
  require(!scenarios.empty(), ErrorCode::kConfig, "no scenarios selected");
  require(max_iterations >= 0, ErrorCode::kConfig, "max_iterations must be >= 0");
  require(window > 0, ErrorCode::kConfig, "window must be > 0");
  require(stop_delta >= 0.0, ErrorCode::kConfig, "stop_delta must be >= 0");
  require(offline_per_batch > 0, ErrorCode::kConfig, "offline_per_batch must be > 0");
  require(delta >= 0.0, ErrorCode::kConfig, "improvement margin must be >= 0");
}

FinetuneResult onlineFinetune(ModuleKind kind, const ModelF& model, const Dataset& offline, SceneCache& scenes,
                              const FinetuneConfig& config, const ModelF* retrieval, const ModelF* place,
                              const ModelF* pick) {
  config.validate();
  require(model.kind() == kind, ErrorCode::kConfig, "model kind does not match the module");
  require(offline.kind == kind && !offline.samples.empty(), ErrorCode::kConfig,
          "fine-tuning needs a non-empty offline dataset of the same module");
  if (kind == ModuleKind::kPlace) require(retrieval != nullptr, ErrorCode::kConfig, "place fine-tuning needs a retrieval model");
  if (kind == ModuleKind::kPick) {
    require(retrieval != nullptr && place != nullptr, ErrorCode::kConfig,
            "pick fine-tuning needs retrieval and place models");
  }
  const EnvConfig& env = scenes.env();
  FinetuneResult res;
  res.model = model;
  ModelF& m = res.model;
  AdamState adam;
  HardExampleBuffer buffer;
  Rng rng(mixSeed(config.seed, 0xf17e));
  std::vector<int> outcomes;
  Dataset scratch;
  scratch.kind = kind;
  scratch.lattice_spacing = offline.lattice_spacing;
  std::vector<float> grad;
  int skipped = 0;
  for (int it = 0; it < config.max_iterations; ++it) {
    const SceneRef ref = sceneAt(config.scenarios, mixSeed(config.seed, 0x0411e), static_cast<std::uint64_t>(it));
    SceneState state;
    try {
      state = scenes.get(ref.scenario, config.split, ref.scene_seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSceneGeneration) throw;
      require(++skipped <= 20 + it / 10, ErrorCode::kIncomplete, "scene stream exhausted");
      continue;
    }
    const PointCloudObs obs = observe(env, state);
    const std::string snap = snapshot(state);
    Sample s;
    s.kind = kind;
    s.scenario = ref.scenario;
    s.scene_seed = ref.scene_seed;
    s.cloud = roundedCloud(obs.points);
    int label = 0;
    if (kind == ModuleKind::kRetrieve) {
      s.query_index = static_cast<int>(argmaxIndex(m.score(obs.points, obs.points)));
      label = retrievalRollout(snap, env, obs.points[static_cast<std::size_t>(s.query_index)]);
    } else {
      const double p0 =
          labelStatistic(retrieval->score(obs.points, obs.points), config.statistic, config.high_score_threshold);
      const auto cands = placeCandidates(env, ref.scenario, obs.points);
      const ModelF& pick_model = kind == ModuleKind::kPick ? m : *pick;
      const ModelF& place_model = kind == ModuleKind::kPlace ? m : *place;
      int p = 0;
      if (kind == ModuleKind::kPick || pick != nullptr) {
        p = static_cast<int>(argmaxIndex(pick_model.score(obs.points, obs.points)));
      } else {
        p = static_cast<int>(uniformIndex(rng, obs.points.size()));
      }
      const int best = static_cast<int>(argmaxIndex(place_model.score(obs.points, cands, p)));
      label = improvementRollout(snap, env, *retrieval, obs.points[static_cast<std::size_t>(p)],
                                 cands[static_cast<std::size_t>(best)], p0, config.statistic,
                                 config.high_score_threshold, config.delta);
      s.query_index = kind == ModuleKind::kPlace ? best : p;
      s.pick_index = kind == ModuleKind::kPlace ? p : -1;
    }
    ++res.episodes;
    outcomes.push_back(label);
    if (label == 0) {
      ++res.failures;
      s.label = 0;
      if (buffer.push(std::move(s))) {
        scratch.samples = buffer.items();
        for (std::size_t k = 0; k < config.offline_per_batch; ++k) {
          scratch.samples.push_back(offline.samples[uniformIndex(rng, offline.samples.size())]);
        }
        std::vector<std::size_t> all(scratch.samples.size());
        for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
        std::vector<Group> groups = makeGroups(scratch, all, m.arch().encoder, kind == ModuleKind::kPlace);
        std::vector<TrainGroup> batch;
        std::vector<const EncoderGeometry*> geo;
        for (const Group& g : groups) {
          batch.push_back(g.tg);
          geo.push_back(&g.geometry);
        }
        lossAndGradient(m, batch, geo, grad);
        adamUpdate(m.params(), grad, adam, config.adam);
        ++res.updates;
        buffer.flush();
      }
    }
    if (outcomes.size() % static_cast<std::size_t>(config.window) == 0) {
      double rate = 0.0;
      for (std::size_t k = outcomes.size() - static_cast<std::size_t>(config.window); k < outcomes.size(); ++k) {
        rate += outcomes[k];
      }
      rate /= config.window;
      res.window_rates.push_back(rate);
      const auto n = res.window_rates.size();
      if (n >= 2 && std::abs(res.window_rates[n - 1] - res.window_rates[n - 2]) < config.stop_delta) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace pileaff
