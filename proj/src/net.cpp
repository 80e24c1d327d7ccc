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

#include "pileaff/net.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pileaff/bytes.hpp"
#include "pileaff/observation.hpp"

namespace pileaff {

const char* moduleName(ModuleKind k) {
  switch (k) {
    case ModuleKind::kRetrieve: return "retrieve";
    case ModuleKind::kPlace: return "place";
    case ModuleKind::kPick: return "pick";
  }
  return "?";
}

ModuleKind parseModule(const std::string& name) {
  if (name == "retrieve") return ModuleKind::kRetrieve;
  if (name == "place") return ModuleKind::kPlace;
  if (name == "pick") return ModuleKind::kPick;
  fail(ErrorCode::kConfig, "unknown module '" + name + "'");
}

void EncoderArch::validate() const {
  require(num_points > 0, ErrorCode::kConfig, "encoder num_points must be > 0");
  require(sa1.centroids > 0 && sa2.centroids > 0 && sa3.centroids == 0, ErrorCode::kConfig,
          "encoder needs two local levels and a global level");
  require(sa1.k > 0 && sa2.k > 0, ErrorCode::kConfig, "group size must be > 0");
  require(sa1.radius > 0.0 && sa1.radius < sa2.radius && sa2.radius < sa3.radius, ErrorCode::kConfig,
          "grouping radii must increase strictly across levels");
  for (const auto* w : {&sa1.widths, &sa2.widths, &sa3.widths, &fp3, &fp2, &fp1}) {
    require(!w->empty(), ErrorCode::kConfig, "every encoder block needs at least one layer");
    for (int v : *w) require(v > 0, ErrorCode::kConfig, "layer widths must be > 0");
  }
}

ModelArch ModelArch::defaults(ModuleKind kind) {
  ModelArch a;
  if (kind == ModuleKind::kPlace) a.head_hidden = {128, 64};
  return a;
}

ModelArch ModelArch::tiny(ModuleKind kind, int num_points) {
  ModelArch a;
  a.encoder.num_points = num_points;
  a.encoder.sa1 = {12, 0.3, 4, {4, 6}};
  a.encoder.sa2 = {5, 0.7, 4, {8}};
  a.encoder.sa3 = {0, std::numeric_limits<double>::infinity(), 0, {10}};
  a.encoder.fp3 = {8};
  a.encoder.fp2 = {6};
  a.encoder.fp1 = {128};
  a.head_hidden = kind == ModuleKind::kPlace ? std::vector<int>{8, 6} : std::vector<int>{6};
  return a;
}

// ---------------------------------------------------------------------------------------------
// Geometry

namespace {

void nearest3(const Eigen::Matrix3Xd& from, const Eigen::Vector3d& q, int* idx, double* w) {
  std::array<double, 3> best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                             std::numeric_limits<double>::infinity()};
  std::array<int, 3> bi{-1, -1, -1};
  for (int j = 0; j < from.cols(); ++j) {
    const double d = (from.col(j) - q).squaredNorm();
    for (int s = 0; s < 3; ++s) {
      if (d < best[s]) {
        for (int t = 2; t > s; --t) {
          best[t] = best[t - 1];
          bi[t] = bi[t - 1];
        }
        best[s] = d;
        bi[s] = j;
        break;
      }
    }
  }
  double sum = 0.0;
  for (int s = 0; s < 3; ++s) {
    if (bi[s] < 0) {
      idx[s] = 0;
      w[s] = 0.0;
      continue;
    }
    idx[s] = bi[s];
    w[s] = 1.0 / (std::sqrt(best[s]) + 1e-8);
    sum += w[s];
  }
  for (int s = 0; s < 3; ++s) w[s] /= sum;
}

std::vector<int> ballGroups(const Eigen::Matrix3Xd& pts, const Eigen::Matrix3Xd& centers, double radius, int k) {
  std::vector<int> out(static_cast<std::size_t>(centers.cols()) * k);
  const double r2 = radius * radius;
  for (int c = 0; c < centers.cols(); ++c) {
    int found = 0;
    for (int j = 0; j < pts.cols() && found < k; ++j) {
      if ((pts.col(j) - centers.col(c)).squaredNorm() <= r2) out[static_cast<std::size_t>(c) * k + found++] = j;
    }
    // The centroid is one of the points, so at least one member exists.
    for (int f = found; f < k; ++f) out[static_cast<std::size_t>(c) * k + f] = out[static_cast<std::size_t>(c) * k];
  }
  return out;
}

std::vector<Vec3> toVec3(const Eigen::Matrix3Xd& m) {
  std::vector<Vec3> v(static_cast<std::size_t>(m.cols()));
  for (int j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = {m(0, j), m(1, j), m(2, j)};
  return v;
}

}  // namespace

EncoderGeometry buildGeometry(const std::vector<Vec3>& cloud, const std::vector<Vec3>& queries,
                              const EncoderArch& arch) {
  require(static_cast<int>(cloud.size()) == arch.num_points, ErrorCode::kInput,
          "cloud has " + std::to_string(cloud.size()) + " points, model expects " + std::to_string(arch.num_points));
  for (const Vec3& p : cloud) require(p.finite(), ErrorCode::kInput, "non-finite input coordinate");
  for (const Vec3& p : queries) require(p.finite(), ErrorCode::kInput, "non-finite query coordinate");
  EncoderGeometry g;
  const int n = arch.num_points;
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    const Vec3& p = cloud[static_cast<std::size_t>(a)];
    const Vec3& q = cloud[static_cast<std::size_t>(b)];
    if (p.x != q.x) return p.x < q.x;
    if (p.y != q.y) return p.y < q.y;
    return p.z < q.z;
  });
  const Vec3 c{};
  const double s = kCoordinateScale;
  g.center = c;
  g.scale = s;
  g.points.resize(3, n);
  for (int j = 0; j < n; ++j) {
    const Vec3 p = (cloud[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] - c) / s;
    g.points.col(j) << p.x, p.y, p.z;
  }
  const int n1 = std::min(arch.sa1.centroids, n);
  const auto idx1 = farthestPointSample(toVec3(g.points), static_cast<std::size_t>(n1), 0);
  g.c1.resize(3, n1);
  for (int k = 0; k < n1; ++k) g.c1.col(k) = g.points.col(idx1[static_cast<std::size_t>(k)]);
  g.group1 = ballGroups(g.points, g.c1, arch.sa1.radius, arch.sa1.k);
  const int n2 = std::min(arch.sa2.centroids, n1);
  const auto idx2 = farthestPointSample(toVec3(g.c1), static_cast<std::size_t>(n2), 0);
  g.c2.resize(3, n2);
  for (int k = 0; k < n2; ++k) g.c2.col(k) = g.c1.col(idx2[static_cast<std::size_t>(k)]);
  g.group2 = ballGroups(g.c1, g.c2, arch.sa2.radius, arch.sa2.k);
  g.nn21.resize(static_cast<std::size_t>(n1) * 3);
  g.w21.resize(g.nn21.size());
  for (int k = 0; k < n1; ++k) nearest3(g.c2, g.c1.col(k), &g.nn21[static_cast<std::size_t>(k) * 3], &g.w21[static_cast<std::size_t>(k) * 3]);
  const int nq = static_cast<int>(queries.size());
  g.queries.resize(3, nq);
  g.nnq.resize(static_cast<std::size_t>(nq) * 3);
  g.wq.resize(g.nnq.size());
  for (int q = 0; q < nq; ++q) {
    const Vec3 p = (queries[static_cast<std::size_t>(q)] - c) / s;
    g.queries.col(q) << p.x, p.y, p.z;
    nearest3(g.c1, g.queries.col(q), &g.nnq[static_cast<std::size_t>(q) * 3], &g.wq[static_cast<std::size_t>(q) * 3]);
  }
  return g;
}

// ---------------------------------------------------------------------------------------------
// Parameter layout

namespace {

struct Layer {
  std::size_t w = 0, b = 0;
  int in = 0, out = 0;
};

enum Block { kSa1 = 0, kSa2, kSa3, kFp3, kFp2, kFp1, kNumBlocks };

struct Plan {
  std::array<std::array<std::vector<Layer>, kNumBlocks>, 2> enc;
  std::vector<Layer> head;  // last layer is linear with one output
  std::vector<TensorDesc> tensors;
  std::size_t total = 0;
};

Plan makePlan(ModuleKind kind, const ModelArch& arch) {
  arch.encoder.validate();
  for (int v : arch.head_hidden) require(v > 0, ErrorCode::kConfig, "head widths must be > 0");
  Plan p;
  auto add = [&](const std::string& name, int in, int out) {
    Layer l;
    l.in = in;
    l.out = out;
    l.w = p.total;
    p.tensors.push_back({name + ".W", out, in, p.total});
    p.total += static_cast<std::size_t>(in) * out;
    l.b = p.total;
    p.tensors.push_back({name + ".b", out, 1, p.total});
    p.total += static_cast<std::size_t>(out);
    return l;
  };
  const EncoderArch& e = arch.encoder;
  const int encoders = kind == ModuleKind::kPlace ? 2 : 1;
  const char* names[kNumBlocks] = {"sa1", "sa2", "sa3", "fp3", "fp2", "fp1"};
  const std::vector<int>* widths[kNumBlocks] = {&e.sa1.widths, &e.sa2.widths, &e.sa3.widths, &e.fp3, &e.fp2, &e.fp1};
  const int w1 = e.sa1.widths.back(), w2 = e.sa2.widths.back(), w3 = e.sa3.widths.back();
  const int inputs[kNumBlocks] = {3, 3 + w1, 3 + w2, w2 + w3, e.fp3.back() + w1, e.fp2.back() + 3};
  for (int k = 0; k < encoders; ++k) {
    for (int b = 0; b < kNumBlocks; ++b) {
      int in = inputs[b];
      for (std::size_t l = 0; l < widths[b]->size(); ++l) {
        const int out = (*widths[b])[l];
        p.enc[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)].push_back(
            add("enc" + std::to_string(k) + "." + names[b] + "." + std::to_string(l), in, out));
        in = out;
      }
    }
  }
  int in = e.featureDim() * encoders;
  for (std::size_t l = 0; l < arch.head_hidden.size(); ++l) {
    p.head.push_back(add("head." + std::to_string(l), in, arch.head_hidden[l]));
    in = arch.head_hidden[l];
  }
  p.head.push_back(add("head.out", in, 1));
  return p;
}

// ---------------------------------------------------------------------------------------------
// Dense blocks

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct MlpCache {
  std::vector<MatT<T>> inputs;
  std::vector<MatT<T>> pre;
};

template <typename T>
MatT<T> mlpForward(const T* P, const std::vector<Layer>& layers, MatT<T> x, bool relu_last, MlpCache<T>* cache) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    Eigen::Map<const MatT<T>> W(P + L.w, L.out, L.in);
    Eigen::Map<const VecT<T>> b(P + L.b, L.out);
    MatT<T> z = W * x;
    z.colwise() += b;
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(z);
    }
    if (l + 1 < layers.size() || relu_last) z = z.cwiseMax(T(0));
    x = std::move(z);
  }
  return x;
}

template <typename T>
MatT<T> mlpBackward(const T* P, T* G, const std::vector<Layer>& layers, const MlpCache<T>& cache, MatT<T> dy,
                    bool relu_last) {
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& L = layers[li];
    if (li + 1 < layers.size() || relu_last) {
      dy = dy.cwiseProduct((cache.pre[li].array() > T(0)).template cast<T>().matrix());
    }
    Eigen::Map<const MatT<T>> W(P + L.w, L.out, L.in);
    Eigen::Map<MatT<T>> gW(G + L.w, L.out, L.in);
    Eigen::Map<VecT<T>> gb(G + L.b, L.out);
    gW.noalias() += dy * cache.inputs[li].transpose();
    gb += dy.rowwise().sum();
    dy = W.transpose() * dy;
  }
  return dy;
}

/// Max over consecutive column groups of size k; argmax holds the winning column per entry.
template <typename T>
MatT<T> groupMax(const MatT<T>& h, int k, std::vector<int>* argmax) {
  const int groups = static_cast<int>(h.cols()) / k;
  MatT<T> out(h.rows(), groups);
  if (argmax) argmax->assign(static_cast<std::size_t>(h.rows()) * groups, 0);
  for (int g = 0; g < groups; ++g) {
    for (int r = 0; r < h.rows(); ++r) {
      int best = g * k;
      for (int j = g * k + 1; j < (g + 1) * k; ++j) {
        if (h(r, j) > h(r, best)) best = j;
      }
      out(r, g) = h(r, best);
      if (argmax) (*argmax)[static_cast<std::size_t>(g) * h.rows() + r] = best;
    }
  }
  return out;
}

template <typename T>
MatT<T> groupMaxBackward(const MatT<T>& dout, const std::vector<int>& argmax, int cols) {
  MatT<T> dh = MatT<T>::Zero(dout.rows(), cols);
  for (int g = 0; g < dout.cols(); ++g) {
    for (int r = 0; r < dout.rows(); ++r) dh(r, argmax[static_cast<std::size_t>(g) * dout.rows() + r]) += dout(r, g);
  }
  return dh;
}

template <typename T>
MatT<T> interpolate(const MatT<T>& src, const std::vector<int>& nn, const std::vector<double>& w, int n) {
  MatT<T> out = MatT<T>::Zero(src.rows(), n);
  for (int q = 0; q < n; ++q) {
    for (int s = 0; s < 3; ++s) {
      const std::size_t k = static_cast<std::size_t>(q) * 3 + s;
      if (w[k] != 0.0) out.col(q) += src.col(nn[k]) * static_cast<T>(w[k]);
    }
  }
  return out;
}

template <typename T>
void interpolateBackward(const MatT<T>& dout, const std::vector<int>& nn, const std::vector<double>& w, MatT<T>& dsrc) {
  for (int q = 0; q < dout.cols(); ++q) {
    for (int s = 0; s < 3; ++s) {
      const std::size_t k = static_cast<std::size_t>(q) * 3 + s;
      if (w[k] != 0.0) dsrc.col(nn[k]) += dout.col(q) * static_cast<T>(w[k]);
    }
  }
}

template <typename T>
struct EncoderCache {
  std::array<MlpCache<T>, kNumBlocks> mlp;
  std::vector<int> am1, am2, am3;
  int h1cols = 0, h2cols = 0, h3cols = 0;
  int w1 = 0, w2 = 0, n1 = 0, n2 = 0;
  std::vector<int> q_nn;
  std::vector<double> q_w;
};

/// Encoder forward for query columns [q0, q0 + nq) of the geometry.
template <typename T>
MatT<T> encoderForward(const T* P, const std::array<std::vector<Layer>, kNumBlocks>& L, const EncoderArch& arch,
                       const EncoderGeometry& g, int q0, int nq, EncoderCache<T>* cache, MatT<T>* level1 = nullptr) {
  const int n1 = static_cast<int>(g.c1.cols()), n2 = static_cast<int>(g.c2.cols());
  const int k1 = arch.sa1.k, k2 = arch.sa2.k;
  const int w1 = arch.sa1.widths.back(), w2 = arch.sa2.widths.back();
  MlpCache<T>* mc = cache ? cache->mlp.data() : nullptr;

  MatT<T> x1(3, n1 * k1);
  for (int c = 0; c < n1; ++c) {
    for (int j = 0; j < k1; ++j) {
      const int src = g.group1[static_cast<std::size_t>(c) * k1 + j];
      x1.col(c * k1 + j) = ((g.points.col(src) - g.c1.col(c)) / arch.sa1.radius).template cast<T>();
    }
  }
  MatT<T> h1 = mlpForward<T>(P, L[kSa1], std::move(x1), true, mc ? &mc[kSa1] : nullptr);
  MatT<T> f1 = groupMax<T>(h1, k1, cache ? &cache->am1 : nullptr);
  if (level1) *level1 = f1;

  MatT<T> x2(3 + w1, n2 * k2);
  for (int c = 0; c < n2; ++c) {
    for (int j = 0; j < k2; ++j) {
      const int src = g.group2[static_cast<std::size_t>(c) * k2 + j];
      x2.block(0, c * k2 + j, 3, 1) = ((g.c1.col(src) - g.c2.col(c)) / arch.sa2.radius).template cast<T>();
      x2.block(3, c * k2 + j, w1, 1) = f1.col(src);
    }
  }
  MatT<T> h2 = mlpForward<T>(P, L[kSa2], std::move(x2), true, mc ? &mc[kSa2] : nullptr);
  MatT<T> f2 = groupMax<T>(h2, k2, cache ? &cache->am2 : nullptr);

  MatT<T> x3(3 + w2, n2);
  x3.topRows(3) = g.c2.template cast<T>();
  x3.bottomRows(w2) = f2;
  MatT<T> h3 = mlpForward<T>(P, L[kSa3], std::move(x3), true, mc ? &mc[kSa3] : nullptr);
  MatT<T> glob = groupMax<T>(h3, n2, cache ? &cache->am3 : nullptr);

  MatT<T> x4(w2 + glob.rows(), n2);
  x4.topRows(w2) = f2;
  x4.bottomRows(glob.rows()) = glob.replicate(1, n2);
  MatT<T> q2 = mlpForward<T>(P, L[kFp3], std::move(x4), true, mc ? &mc[kFp3] : nullptr);

  MatT<T> i2 = interpolate<T>(q2, g.nn21, g.w21, n1);
  MatT<T> x5(i2.rows() + w1, n1);
  x5.topRows(i2.rows()) = i2;
  x5.bottomRows(w1) = f1;
  MatT<T> q1 = mlpForward<T>(P, L[kFp2], std::move(x5), true, mc ? &mc[kFp2] : nullptr);

  std::vector<int> nn(g.nnq.begin() + q0 * 3, g.nnq.begin() + (q0 + nq) * 3);
  std::vector<double> w(g.wq.begin() + q0 * 3, g.wq.begin() + (q0 + nq) * 3);
  MatT<T> iq = interpolate<T>(q1, nn, w, nq);
  MatT<T> x6(iq.rows() + 3, nq);
  x6.topRows(iq.rows()) = iq;
  x6.bottomRows(3) = g.queries.middleCols(q0, nq).template cast<T>();
  MatT<T> out = mlpForward<T>(P, L[kFp1], std::move(x6), true, mc ? &mc[kFp1] : nullptr);

  if (cache) {
    cache->h1cols = static_cast<int>(h1.cols());
    cache->h2cols = static_cast<int>(h2.cols());
    cache->h3cols = static_cast<int>(h3.cols());
    cache->w1 = w1;
    cache->w2 = w2;
    cache->n1 = n1;
    cache->n2 = n2;
    cache->q_nn = std::move(nn);
    cache->q_w = std::move(w);
  }
  return out;
}

template <typename T>
void encoderBackward(const T* P, T* G, const std::array<std::vector<Layer>, kNumBlocks>& L, const EncoderArch& arch,
                     const EncoderGeometry& g, const EncoderCache<T>& c, const MatT<T>& dout) {
  const int k2 = arch.sa2.k;
  MatT<T> dx6 = mlpBackward<T>(P, G, L[kFp1], c.mlp[kFp1], dout, true);
  const int wq1 = static_cast<int>(dx6.rows()) - 3;
  MatT<T> dq1 = MatT<T>::Zero(wq1, c.n1);
  interpolateBackward<T>(dx6.topRows(wq1), c.q_nn, c.q_w, dq1);

  MatT<T> dx5 = mlpBackward<T>(P, G, L[kFp2], c.mlp[kFp2], dq1, true);
  const int wq2 = static_cast<int>(dx5.rows()) - c.w1;
  MatT<T> df1 = dx5.bottomRows(c.w1);
  MatT<T> dq2 = MatT<T>::Zero(wq2, c.n2);
  interpolateBackward<T>(dx5.topRows(wq2), g.nn21, g.w21, dq2);

  MatT<T> dx4 = mlpBackward<T>(P, G, L[kFp3], c.mlp[kFp3], dq2, true);
  MatT<T> df2 = dx4.topRows(c.w2);
  MatT<T> dglob = dx4.bottomRows(dx4.rows() - c.w2).rowwise().sum();

  MatT<T> dh3 = groupMaxBackward<T>(dglob, c.am3, c.h3cols);
  MatT<T> dx3 = mlpBackward<T>(P, G, L[kSa3], c.mlp[kSa3], dh3, true);
  df2 += dx3.bottomRows(c.w2);

  MatT<T> dh2 = groupMaxBackward<T>(df2, c.am2, c.h2cols);
  MatT<T> dx2 = mlpBackward<T>(P, G, L[kSa2], c.mlp[kSa2], dh2, true);
  for (int col = 0; col < dx2.cols(); ++col) {
    const int src = g.group2[static_cast<std::size_t>(col / k2) * k2 + col % k2];
    df1.col(src) += dx2.block(3, col, c.w1, 1);
  }
  MatT<T> dh1 = groupMaxBackward<T>(df1, c.am1, c.h1cols);
  mlpBackward<T>(P, G, L[kSa1], c.mlp[kSa1], dh1, true);
}

template <typename T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

const Plan& cachedPlan(ModuleKind kind, const ModelArch& arch) {
  // Plans are cheap but looked up on every forward; keep the most recent one per kind.
  thread_local std::array<std::pair<ModelArch, Plan>, 3> cache;
  thread_local std::array<bool, 3> valid{false, false, false};
  auto& slot = cache[static_cast<std::size_t>(kind)];
  if (!valid[static_cast<std::size_t>(kind)] || !(slot.first == arch)) {
    slot = {arch, makePlan(kind, arch)};
    valid[static_cast<std::size_t>(kind)] = true;
  }
  return slot.second;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Model

template <typename T>
std::vector<TensorDesc> AffordanceModel<T>::layout(ModuleKind kind, const ModelArch& arch) {
  return makePlan(kind, arch).tensors;
}

template <typename T>
AffordanceModel<T>::AffordanceModel(ModuleKind kind, const ModelArch& arch, std::uint64_t seed)
    : kind_(kind), arch_(arch) {
  const Plan plan = makePlan(kind, arch);
  tensors_ = plan.tensors;
  params_.assign(plan.total, T(0));
  Rng rng(mixSeed(seed, 0xa1f0 + static_cast<std::uint64_t>(kind)));
  // Box-Muller on the portable uniform draw keeps initialization identical across standard libraries.
  auto normal = [](Rng& g) {
    const double u1 = 1.0 - uniform01(g), u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  for (const TensorDesc& t : tensors_) {
    if (t.cols == 1 && t.name.size() > 2 && t.name.substr(t.name.size() - 2) == ".b") continue;
    // He initialization for rectified layers, a smaller scale for the output unit.
    const bool out = t.name.rfind("head.out", 0) == 0;
    const double stddev = out ? std::sqrt(1.0 / t.cols) : std::sqrt(2.0 / t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) params_[t.offset + i] = static_cast<T>(stddev * normal(rng));
  }
}

template <typename T>
template <typename U>
AffordanceModel<U> AffordanceModel<T>::cast() const {
  AffordanceModel<U> m;
  m.kind_ = kind_;
  m.arch_ = arch_;
  m.tensors_ = tensors_;
  m.params_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) m.params_[i] = static_cast<U>(params_[i]);
  return m;
}

template <typename T>
typename AffordanceModel<T>::Mat AffordanceModel<T>::encode(int e, const EncoderGeometry& g) const {
  require(e >= 0 && e < numEncoders(), ErrorCode::kInvalidParameter, "encoder index out of range");
  const Plan& plan = cachedPlan(kind_, arch_);
  return encoderForward<T>(params_.data(), plan.enc[static_cast<std::size_t>(e)], arch_.encoder, g, 0,
                           static_cast<int>(g.queries.cols()), nullptr);
}

template <typename T>
typename AffordanceModel<T>::Mat AffordanceModel<T>::levelOneFeatures(int e, const EncoderGeometry& g) const {
  require(e >= 0 && e < numEncoders(), ErrorCode::kInvalidParameter, "encoder index out of range");
  const Plan& plan = cachedPlan(kind_, arch_);
  Mat f1;
  encoderForward<T>(params_.data(), plan.enc[static_cast<std::size_t>(e)], arch_.encoder, g, 0,
                    static_cast<int>(g.queries.cols()), nullptr, &f1);
  return f1;
}

namespace {

/// Forward (and optionally backward) of one group. Returns the summed BCE over its queries and
/// writes predictions. `dscale` multiplies the loss gradient (1 / batch size).
template <typename T>
double groupPass(const AffordanceModel<T>& m, const Plan& plan, const EncoderGeometry& g, bool place,
                 const std::vector<int>* labels, std::vector<double>* preds, T* grad, double dscale) {
  const T* P = m.params().data();
  const EncoderArch& arch = m.arch().encoder;
  const int D = arch.featureDim();
  const int q0 = place ? 1 : 0;
  const int nq = static_cast<int>(g.queries.cols()) - q0;
  const bool train = grad != nullptr;
  std::array<EncoderCache<T>, 2> ec;
  MatT<T> feat = encoderForward<T>(P, plan.enc[place ? 1 : 0], arch, g, q0, nq, train ? &ec[1] : nullptr);
  MatT<T> pick;
  MatT<T> x;
  if (place) {
    pick = encoderForward<T>(P, plan.enc[0], arch, g, 0, 1, train ? &ec[0] : nullptr);
    x.resize(2 * D, nq);
    x.topRows(D) = pick.replicate(1, nq);
    x.bottomRows(D) = feat;
  } else {
    x = std::move(feat);
  }
  MlpCache<T> hc;
  MatT<T> z = mlpForward<T>(P, plan.head, std::move(x), false, train ? &hc : nullptr);
  double loss = 0.0;
  MatT<T> dz(1, nq);
  for (int q = 0; q < nq; ++q) {
    const double p = static_cast<double>(sigmoid<T>(z(0, q)));
    if (preds) preds->push_back(p);
    if (labels) {
      const int y = (*labels)[static_cast<std::size_t>(q)];
      loss += bce(p, y);
      const bool clamped = p <= kBceEps || p >= 1.0 - kBceEps;
      dz(0, q) = clamped ? T(0) : static_cast<T>((p - y) * dscale);
    }
  }
  if (!train) return loss;
  MatT<T> dx = mlpBackward<T>(P, grad, plan.head, hc, dz, false);
  if (place) {
    MatT<T> dpick = dx.topRows(D).rowwise().sum();
    encoderBackward<T>(P, grad, plan.enc[0], arch, g, ec[0], dpick);
    encoderBackward<T>(P, grad, plan.enc[1], arch, g, ec[1], dx.bottomRows(D));
  } else {
    encoderBackward<T>(P, grad, plan.enc[0], arch, g, ec[1], dx);
  }
  return loss;
}

std::vector<Vec3> groupQueries(const TrainGroup& grp, bool place) {
  std::vector<Vec3> q;
  if (place) {
    require(grp.pick_index >= 0 && grp.pick_index < static_cast<int>(grp.cloud->size()), ErrorCode::kInvalidParameter,
            "pick index out of range");
    q.push_back((*grp.cloud)[static_cast<std::size_t>(grp.pick_index)]);
  }
  q.insert(q.end(), grp.queries.begin(), grp.queries.end());
  return q;
}

}  // namespace

template <typename T>
std::vector<double> AffordanceModel<T>::score(const std::vector<Vec3>& cloud, const std::vector<Vec3>& queries,
                                              int pick_index) const {
  const bool place = kind_ == ModuleKind::kPlace;
  TrainGroup grp;
  grp.cloud = &cloud;
  grp.pick_index = pick_index;
  grp.queries = queries;
  const EncoderGeometry g = buildGeometry(cloud, groupQueries(grp, place), arch_.encoder);
  std::vector<double> out;
  out.reserve(queries.size());
  groupPass<T>(*this, cachedPlan(kind_, arch_), g, place, nullptr, &out, nullptr, 1.0);
  return out;
}

double bce(double prediction, int label) {
  require(label == 0 || label == 1, ErrorCode::kInput, "label must be 0 or 1");
  require(std::isfinite(prediction), ErrorCode::kInput, "prediction must be finite");
  const double p = std::clamp(prediction, kBceEps, 1.0 - kBceEps);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

template <typename T>
double lossAndGradient(const AffordanceModel<T>& model, const std::vector<TrainGroup>& batch,
                       const std::vector<const EncoderGeometry*>& geometry, std::vector<T>& grad) {
  require(geometry.size() == batch.size(), ErrorCode::kInvalidParameter, "one geometry per group required");
  const bool place = model.kind() == ModuleKind::kPlace;
  const Plan& plan = cachedPlan(model.kind(), model.arch());
  std::size_t total = 0;
  for (const TrainGroup& grp : batch) {
    require(grp.labels.size() == grp.queries.size(), ErrorCode::kInvalidParameter, "one label per query required");
    total += grp.queries.size();
  }
  require(total > 0, ErrorCode::kInvalidParameter, "empty batch");
  grad.assign(model.params().size(), T(0));
  const double scale = 1.0 / static_cast<double>(total);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].queries.empty()) continue;
    loss += groupPass<T>(model, plan, *geometry[i], place, &batch[i].labels, nullptr, grad.data(), scale);
  }
  for (const TensorDesc& t : model.tensors()) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!std::isfinite(static_cast<double>(grad[t.offset + k]))) {
        fail(ErrorCode::kNumerical, "non-finite gradient in tensor " + t.name);
      }
    }
  }
  return loss * scale;
}

template <typename T>
double lossAndGradient(const AffordanceModel<T>& model, const std::vector<TrainGroup>& batch, std::vector<T>& grad) {
  const bool place = model.kind() == ModuleKind::kPlace;
  std::vector<EncoderGeometry> geo;
  geo.reserve(batch.size());
  for (const TrainGroup& grp : batch) {
    require(grp.cloud != nullptr, ErrorCode::kInvalidParameter, "group without a cloud");
    geo.push_back(buildGeometry(*grp.cloud, groupQueries(grp, place), model.arch().encoder));
  }
  std::vector<const EncoderGeometry*> ptrs;
  for (const auto& g : geo) ptrs.push_back(&g);
  return lossAndGradient(model, batch, ptrs, grad);
}

template <typename T>
void adamUpdate(std::vector<T>& params, const std::vector<T>& grad, AdamState& st, const AdamParams& hp) {
  require(grad.size() == params.size(), ErrorCode::kInvalidParameter, "gradient size mismatch");
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
    st.t = 0;
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    st.m[i] = hp.beta1 * st.m[i] + (1.0 - hp.beta1) * g;
    st.v[i] = hp.beta2 * st.v[i] + (1.0 - hp.beta2) * g * g;
    if (st.m[i] == 0.0) continue;
    const double mh = st.m[i] / c1, vh = st.v[i] / c2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) - hp.lr * mh / (std::sqrt(vh) + hp.eps));
  }
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void putWidths(ByteWriter& w, const std::vector<int>& v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  for (int x : v) w.put<std::uint32_t>(static_cast<std::uint32_t>(x));
}

std::vector<int> getWidths(ByteReader& r) {
  const std::uint32_t n = r.get<std::uint32_t>();
  require(n <= 64, ErrorCode::kFormat, "implausible layer count in checkpoint");
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(r.get<std::uint32_t>());
  return v;
}

void putLevel(ByteWriter& w, const SaLevel& l) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(l.centroids));
  w.put<double>(l.radius);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(l.k));
  putWidths(w, l.widths);
}

SaLevel getLevel(ByteReader& r) {
  SaLevel l;
  l.centroids = static_cast<int>(r.get<std::uint32_t>());
  l.radius = r.get<double>();
  l.k = static_cast<int>(r.get<std::uint32_t>());
  l.widths = getWidths(r);
  return l;
}

}  // namespace

std::string saveCheckpoint(const ModelF& model, const CheckpointMeta& meta) {
  ByteWriter w;
  w.putBytes("AFF1");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.kind()));
  const ModelArch& a = model.arch();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.encoder.num_points));
  putLevel(w, a.encoder.sa1);
  putLevel(w, a.encoder.sa2);
  putLevel(w, a.encoder.sa3);
  putWidths(w, a.encoder.fp3);
  putWidths(w, a.encoder.fp2);
  putWidths(w, a.encoder.fp1);
  putWidths(w, a.head_hidden);
  w.putString(meta.config_hash);
  w.put<std::uint64_t>(meta.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.tensors().size()));
  for (const TensorDesc& t : model.tensors()) {
    w.putString(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.cols));
    w.putArray(std::span<const float>(model.params().data() + t.offset, t.size()));
  }
  return w.take();
}

ModelF loadCheckpoint(std::string_view blob, CheckpointMeta* meta) {
  ByteReader r(blob);
  require(r.getBytes(4) == "AFF1", ErrorCode::kFormat, "not an AFF1 checkpoint");
  const std::uint32_t version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  const std::uint8_t tag = r.get<std::uint8_t>();
  require(tag <= 2, ErrorCode::kFormat, "unknown module tag in checkpoint");
  const ModuleKind kind = static_cast<ModuleKind>(tag);
  ModelArch a;
  a.encoder.num_points = static_cast<int>(r.get<std::uint32_t>());
  a.encoder.sa1 = getLevel(r);
  a.encoder.sa2 = getLevel(r);
  a.encoder.sa3 = getLevel(r);
  a.encoder.fp3 = getWidths(r);
  a.encoder.fp2 = getWidths(r);
  a.encoder.fp1 = getWidths(r);
  a.head_hidden = getWidths(r);
  CheckpointMeta m;
  m.config_hash = r.getString();
  m.seed = r.get<std::uint64_t>();
  ModelF model(kind, a, 0);
  const std::uint32_t count = r.get<std::uint32_t>();
  require(count == model.tensors().size(), ErrorCode::kFormat, "checkpoint tensor count does not match architecture");
  for (const TensorDesc& t : model.tensors()) {
    const std::string name = r.getString();
    const int rows = static_cast<int>(r.get<std::uint32_t>());
    const int cols = static_cast<int>(r.get<std::uint32_t>());
    require(name == t.name && rows == t.rows && cols == t.cols, ErrorCode::kFormat,
            "checkpoint tensor " + name + " does not match architecture (expected " + t.name + ")");
    r.getArray(std::span<float>(model.params().data() + t.offset, t.size()));
  }
  require(r.atEnd(), ErrorCode::kFormat, "trailing bytes after checkpoint");
  if (meta) *meta = m;
  return model;
}

template class AffordanceModel<float>;
template class AffordanceModel<double>;
template AffordanceModel<double> AffordanceModel<float>::cast<double>() const;
template AffordanceModel<float> AffordanceModel<double>::cast<float>() const;
template AffordanceModel<float> AffordanceModel<float>::cast<float>() const;
template AffordanceModel<double> AffordanceModel<double>::cast<double>() const;
template double lossAndGradient(const ModelF&, const std::vector<TrainGroup>&, std::vector<float>&);
template double lossAndGradient(const ModelD&, const std::vector<TrainGroup>&, std::vector<double>&);
template double lossAndGradient(const ModelF&, const std::vector<TrainGroup>&, const std::vector<const EncoderGeometry*>&,
                                std::vector<float>&);
template double lossAndGradient(const ModelD&, const std::vector<TrainGroup>&, const std::vector<const EncoderGeometry*>&,
                                std::vector<double>&);
template void adamUpdate(std::vector<float>&, const std::vector<float>&, AdamState&, const AdamParams&);
template void adamUpdate(std::vector<double>&, const std::vector<double>&, AdamState&, const AdamParams&);

}  // namespace pileaff
