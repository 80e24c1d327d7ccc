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

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pileaff/common.hpp"

namespace pileaff {

enum class ModuleKind : std::uint8_t { kRetrieve = 0, kPlace = 1, kPick = 2 };

const char* moduleName(ModuleKind k);
ModuleKind parseModule(const std::string& name);

/// One set-abstraction level. centroids == 0 marks the global level (radius infinite, k unused).
struct SaLevel {
  int centroids = 0;
  double radius = std::numeric_limits<double>::infinity();
  int k = 0;
  std::vector<int> widths;

  bool operator==(const SaLevel&) const = default;
};

/// Three set-abstraction levels (local, local, global) and three propagation blocks back to the
/// query points. The last propagation width is the per-point feature size.
struct EncoderArch {
  int num_points = 512;
  SaLevel sa1{128, 0.1, 16, {16, 32}};
  SaLevel sa2{32, 0.25, 16, {64, 64}};
  SaLevel sa3{0, std::numeric_limits<double>::infinity(), 0, {128}};
  std::vector<int> fp3{128};
  std::vector<int> fp2{64};
  std::vector<int> fp1{128};

  int featureDim() const { return fp1.empty() ? 0 : fp1.back(); }
  void validate() const;
  bool operator==(const EncoderArch&) const = default;
};

struct ModelArch {
  EncoderArch encoder;
  std::vector<int> head_hidden{64};  // retrieval and pick; place defaults to {128, 64}

  static ModelArch defaults(ModuleKind kind);
  /// Reduced widths used for finite-difference checks on small clouds.
  static ModelArch tiny(ModuleKind kind, int num_points);
  bool operator==(const ModelArch&) const = default;
};

struct TensorDesc {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Fixed geometric structure of one observation: canonical order, normalization, sampled centroids,
/// neighborhoods and interpolation stencils. Not differentiated.
inline constexpr double kCoordinateScale = 0.5;  // m

struct EncoderGeometry {
  Vec3 center;
  double scale = 1.0;
  Eigen::Matrix3Xd points;  // normalized, canonical order
  Eigen::Matrix3Xd c1, c2;
  std::vector<int> group1;  // c1.cols() * k1 indices into points
  std::vector<int> group2;  // c2.cols() * k2 indices into c1
  std::vector<int> nn21;    // 3 per c1 column, indices into c2
  std::vector<double> w21;
  Eigen::Matrix3Xd queries;  // normalized query points
  std::vector<int> nnq;      // 3 per query, indices into c1
  std::vector<double> wq;
};

/// Coordinates stay in the scenario's world frame (the container pose is fixed, so absolute position
/// is informative) and are divided by kCoordinateScale. Points are processed in lexicographic
/// (x, y, z) order so that results do not depend on input order.
EncoderGeometry buildGeometry(const std::vector<Vec3>& cloud, const std::vector<Vec3>& queries,
                              const EncoderArch& arch);

template <typename T>
class AffordanceModel {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  AffordanceModel() = default;
  AffordanceModel(ModuleKind kind, const ModelArch& arch, std::uint64_t seed);

  ModuleKind kind() const { return kind_; }
  const ModelArch& arch() const { return arch_; }
  const std::vector<TensorDesc>& tensors() const { return tensors_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  int numEncoders() const { return kind_ == ModuleKind::kPlace ? 2 : 1; }

  /// Per-point features (feature_dim x queries) from encoder e.
  Mat encode(int e, const EncoderGeometry& g) const;
  /// Pooled first-level features (width x level-1 centroids) from encoder e.
  Mat levelOneFeatures(int e, const EncoderGeometry& g) const;

  /// Scores for each query. Retrieval/pick ignore pick_index; place conditions on cloud point pick_index.
  std::vector<double> score(const std::vector<Vec3>& cloud, const std::vector<Vec3>& queries,
                            int pick_index = -1) const;

  template <typename U>
  AffordanceModel<U> cast() const;

  /// Layout shared by every model with the same kind and architecture.
  static std::vector<TensorDesc> layout(ModuleKind kind, const ModelArch& arch);

 private:
  template <typename U>
  friend class AffordanceModel;

  ModuleKind kind_ = ModuleKind::kRetrieve;
  ModelArch arch_;
  std::vector<TensorDesc> tensors_;
  std::vector<T> params_;
};

using ModelF = AffordanceModel<float>;
using ModelD = AffordanceModel<double>;

/// Clamped binary cross entropy.
inline constexpr double kBceEps = 1e-7;
double bce(double prediction, int label);

/// One observation in a batch with the points to score and their labels.
struct TrainGroup {
  const std::vector<Vec3>* cloud = nullptr;
  int pick_index = -1;
  std::vector<Vec3> queries;
  std::vector<int> labels;
};

/// Mean BCE over all queries of the batch and its exact gradient (same layout as params).
template <typename T>
double lossAndGradient(const AffordanceModel<T>& model, const std::vector<TrainGroup>& batch, std::vector<T>& grad);

/// Same, for precomputed geometries (one per group).
template <typename T>
double lossAndGradient(const AffordanceModel<T>& model, const std::vector<TrainGroup>& batch,
                       const std::vector<const EncoderGeometry*>& geometry, std::vector<T>& grad);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// One adaptive-moment step. Zero gradients leave parameters unchanged.
template <typename T>
void adamUpdate(std::vector<T>& params, const std::vector<T>& grad, AdamState& state, const AdamParams& hp);

/// "AFF1" checkpoint: module tag, architecture, provenance, then f32 tensors in layout order.
struct CheckpointMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
};
std::string saveCheckpoint(const ModelF& model, const CheckpointMeta& meta);
ModelF loadCheckpoint(std::string_view blob, CheckpointMeta* meta = nullptr);

}  // namespace pileaff
