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

#pragma once

// Data collection by simulator rollouts, offline training, and online fine-tuning with a buffer of
// inference-time failures.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pileaff/env.hpp"
#include "pileaff/net.hpp"
#include "pileaff/policy.hpp"

namespace pileaff {

/// One labelled query. Place samples index placeCandidates() (observed points, then the support
/// lattice); retrieval and pick samples index the observed points.
struct Sample {
  ModuleKind kind = ModuleKind::kRetrieve;
  ContainerKind scenario = ContainerKind::kBasket;
  std::uint64_t scene_seed = 0;
  std::shared_ptr<const Cloud> cloud;  // stored at f32 precision
  std::int32_t query_index = 0;
  std::int32_t pick_index = -1;
  std::uint8_t label = 0;
};

/// Scalar summary of a retrieval map that decides whether a pick-place improved the pile.
enum class LabelStatistic : std::uint8_t { kPHigh = 0, kMeanAffordance = 1 };
const char* labelStatisticName(LabelStatistic s);
LabelStatistic parseLabelStatistic(const std::string& name);
double labelStatistic(const std::vector<double>& map, LabelStatistic s, double high_score_threshold);

struct Dataset {
  ModuleKind kind = ModuleKind::kRetrieve;
  Split split = Split::kSeen;
  std::uint64_t seed = 0;
  std::string config_hash;
  double lattice_spacing = 0.05;
  double delta = 0.0;  // improvement margin used for place and pick labels
  LabelStatistic statistic = LabelStatistic::kPHigh;
  std::vector<Sample> samples;

  /// Negative and positive counts.
  std::array<std::uint64_t, 2> labelCounts() const;
  std::vector<std::uint64_t> sceneSeeds() const;
};

/// "AFFD" record stream: manifest (kind, split, seed, config hash, lattice spacing, margin, counts)
/// followed by the samples. Decoding verifies that the manifest counts match the contents.
std::string encodeDataset(const Dataset& d);
Dataset decodeDataset(std::string_view blob);

/// Coordinates a sample's query index points at.
Vec3 queryPoint(const Dataset& d, const Sample& s);

struct CollectConfig {
  std::vector<ContainerKind> scenarios{ContainerKind::kWashingMachine, ContainerKind::kSofa, ContainerKind::kBasket};
  Split split = Split::kSeen;
  std::size_t target_count = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  int queries_per_scene = 4;  // retrieval: distinct query points per scene
  int picks_per_scene = 2;    // place: distinct pick points per scene
  int places_per_pick = 4;    // place: place candidates per pick
  double delta = 0.02;
  LabelStatistic statistic = LabelStatistic::kPHigh;
  double high_score_threshold = 0.9;
  double min_class_fraction = 0.25;
  double budget_factor = 5.0;  // rollout budget = budget_factor * target_count

  void validate() const;
};

/// Labels retrieval at uniformly drawn observed points by direct rollouts.
Dataset collectRetrievalData(SceneCache& scenes, const CollectConfig& config);
/// Labels random (pick, place) pairs by the retrieval-map improvement they cause.
Dataset collectPlaceData(SceneCache& scenes, const CollectConfig& config, const ModelF& retrieval);
/// Labels random picks followed by the best place under the place model.
Dataset collectPickData(SceneCache& scenes, const CollectConfig& config, const ModelF& retrieval,
                        const ModelF& place);

/// Re-runs the rollout behind one stored sample from its scene seed and returns the label.
int relabel(SceneCache& scenes, const Dataset& d, const Sample& s, const ModelF* retrieval, const ModelF* place,
            double high_score_threshold = 0.9);

/// Improvement label: 1 iff statistic(after) - statistic(before) >= delta.
int improvementLabel(double before, double after, double delta);

/// Synthetic separable task: label 1 iff a point lies in the top 20% of its observation by height.
Dataset makeHeightDataset(SceneCache& scenes, const std::vector<ContainerKind>& scenarios, int num_scenes,
                          int queries_per_scene, std::uint64_t seed);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 128;
  std::uint64_t seed = 0;
  AdamParams adam;
  double holdout_fraction = 0.1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
  double holdout_accuracy = 0.0;
};

struct TrainResult {
  ModelF model;
  std::vector<EpochStats> curve;
  std::vector<std::uint64_t> holdout_scenes;

  /// epoch,train_loss,holdout_loss,holdout_accuracy
  std::string curveCsv() const;
};

/// Held-out scene seeds: a seeded ceil(fraction * scenes) subset (at least one when there are two
/// or more scenes, none otherwise).
std::vector<std::uint64_t> holdoutScenes(const Dataset& d, double fraction, std::uint64_t seed);

/// Minibatch Adam on mean BCE. Samples that share an observation form one group; batches are
/// filled with whole groups in a seeded per-epoch order.
TrainResult trainModule(ModuleKind kind, const Dataset& dataset, const ModelArch& arch, const TrainConfig& config);

/// Mean BCE and accuracy (threshold 0.5) of a model on the given samples.
struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};
EvalStats evaluateSamples(const ModelF& model, const Dataset& d, const std::vector<std::size_t>& indices);

class HardExampleBuffer {
 public:
  static constexpr std::size_t kCapacity = 64;

  /// Returns true once the buffer is full.
  bool push(Sample s);
  bool full() const { return items_.size() >= kCapacity; }
  std::size_t size() const { return items_.size(); }
  const std::vector<Sample>& items() const { return items_; }
  void flush() { items_.clear(); }

 private:
  std::vector<Sample> items_;
};

struct FinetuneConfig {
  std::vector<ContainerKind> scenarios{ContainerKind::kWashingMachine, ContainerKind::kSofa, ContainerKind::kBasket};
  Split split = Split::kSeen;
  std::uint64_t seed = 0;
  int max_iterations = 300;  // episodes
  int window = 50;
  double stop_delta = 0.02;
  std::size_t offline_per_batch = 64;
  AdamParams adam;
  double delta = 0.02;
  LabelStatistic statistic = LabelStatistic::kPHigh;
  double high_score_threshold = 0.9;

  void validate() const;
};

struct FinetuneResult {
  ModelF model;
  int episodes = 0;
  int failures = 0;
  int updates = 0;
  bool converged = false;
  std::vector<double> window_rates;
};

/// Inference-driven rollouts; each failure becomes a label-0 sample in the buffer and every full
/// buffer triggers one update on 64 buffered plus 64 offline samples.
FinetuneResult onlineFinetune(ModuleKind kind, const ModelF& model, const Dataset& offline, SceneCache& scenes,
                              const FinetuneConfig& config, const ModelF* retrieval = nullptr,
                              const ModelF* place = nullptr, const ModelF* pick = nullptr);

}  // namespace pileaff
