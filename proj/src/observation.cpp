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

#include "pileaff/observation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pileaff {

void CameraPose::validate() const {
  require(position.finite() && look_at.finite(), ErrorCode::kInvalidParameter, "camera pose must be finite");
  require((position - look_at).norm() > 1e-9, ErrorCode::kInvalidParameter, "camera position equals look_at");
  require(fov_deg > 0.0 && fov_deg < 179.0, ErrorCode::kInvalidParameter, "camera fov must be in (0, 179)");
  require(width > 0 && height > 0, ErrorCode::kInvalidParameter, "camera grid must be non-empty");
}

CameraPose defaultCamera(ContainerKind kind) {
  CameraPose c;
  switch (kind) {
    case ContainerKind::kWashingMachine:
      c.position = {0.0, 0.6, 0.55};
      c.look_at = {0.0, -0.2, 0.25};
      c.fov_deg = 50.0;
      break;
    case ContainerKind::kBasket:
      c.position = {0.0, 0.0, 1.3};
      c.look_at = {0.0, 0.0, 0.0};
      c.fov_deg = 32.0;
      break;
    case ContainerKind::kSofa:
      c.position = {0.0, 0.0, 1.3};
      c.look_at = {0.0, 0.0, 0.0};
      c.fov_deg = 55.0;
      break;
  }
  return c;
}

std::vector<std::uint32_t> farthestPointSample(const std::vector<Vec3>& points, std::size_t n,
                                                std::size_t start_index) {
  require(n <= points.size(), ErrorCode::kInvalidParameter, "cannot sample more points than available");
  if (n == 0) return {};
  require(start_index < points.size(), ErrorCode::kInvalidParameter, "start index out of range");
  std::vector<std::uint32_t> out;
  out.reserve(n);
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  std::size_t cur = start_index;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(static_cast<std::uint32_t>(cur));
    dist[cur] = -1.0;
    double best = -1.0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (dist[i] < 0.0) continue;
      dist[i] = std::min(dist[i], (points[i] - points[cur]).squaredNorm());
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
    cur = next;
  }
  return out;
}

namespace {

struct Basis {
  Vec3 forward, right, up;
};

Basis cameraBasis(const CameraPose& cam) {
  Basis b;
  b.forward = (cam.look_at - cam.position) / (cam.look_at - cam.position).norm();
  Vec3 world_up{0, 0, 1};
  if (std::abs(b.forward.z) > 0.99) world_up = Vec3{0, 1, 0};
  b.right = b.forward.cross(world_up);
  b.right = b.right / b.right.norm();
  b.up = b.right.cross(b.forward);
  return b;
}

struct Hit {
  Vec3 point;
  Provenance prov;
};

}  // namespace

PointCloudObs renderCloud(const SceneState& state, const CameraPose& camera, std::size_t n, double contact_radius) {
  camera.validate();
  require(n > 0, ErrorCode::kInvalidParameter, "point count must be > 0");
  require(contact_radius > 0.0, ErrorCode::kInvalidParameter, "contact_radius must be > 0");
  const Basis b = cameraBasis(camera);
  const double tan_half = std::tan(0.5 * camera.fov_deg * std::numbers::pi / 180.0);
  const double r = contact_radius, r2 = r * r;

  // Splat every particle onto the pixels its sphere can cover, then test only those rays.
  const int W = camera.width, H = camera.height;
  std::vector<double> depth(static_cast<std::size_t>(W) * H, std::numeric_limits<double>::infinity());
  std::vector<int> owner_g(depth.size(), -1), owner_p(depth.size(), -1);
  auto rayDir = [&](int px, int py) {
    const double sx = ((px + 0.5) / W * 2.0 - 1.0) * tan_half;
    const double sy = (1.0 - (py + 0.5) / H * 2.0) * tan_half;
    const Vec3 d = b.forward + b.right * sx + b.up * sy;
    return d / d.norm();
  };
  // Floor plane z = 0 occludes everything behind it.
  for (int py = 0; py < H; ++py) {
    for (int px = 0; px < W; ++px) {
      const Vec3 d = rayDir(px, py);
      if (d.z < 0.0 && camera.position.z > 0.0) depth[static_cast<std::size_t>(py) * W + px] = -camera.position.z / d.z;
      if (camera.position.z <= 0.0) depth[static_cast<std::size_t>(py) * W + px] = 0.0;
    }
  }
  for (std::size_t g = 0; g < state.garments.size(); ++g) {
    const auto& gi = state.garments[g];
    for (std::size_t p = 0; p < gi.size(); ++p) {
      const Vec3 rel = gi.positions[p] - camera.position;
      const double zc = rel.dot(b.forward);
      if (zc <= r) continue;
      const double xc = rel.dot(b.right) / zc, yc = rel.dot(b.up) / zc;
      // Conservative screen-space radius of the sphere's silhouette.
      const double ang = r / (zc - r) * (1.0 + xc * xc + yc * yc);
      const double px_lo = ((xc - ang) / tan_half + 1.0) * 0.5 * W - 0.5;
      const double px_hi = ((xc + ang) / tan_half + 1.0) * 0.5 * W - 0.5;
      const double py_lo = (1.0 - (yc + ang) / tan_half) * 0.5 * H - 0.5;
      const double py_hi = (1.0 - (yc - ang) / tan_half) * 0.5 * H - 0.5;
      const int x0 = std::max(0, static_cast<int>(std::floor(px_lo)));
      const int x1 = std::min(W - 1, static_cast<int>(std::ceil(px_hi)));
      const int y0 = std::max(0, static_cast<int>(std::floor(py_lo)));
      const int y1 = std::min(H - 1, static_cast<int>(std::ceil(py_hi)));
      for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
          const Vec3 d = rayDir(px, py);
          const double tb = rel.dot(d);
          const double disc = tb * tb - (rel.squaredNorm() - r2);
          if (disc < 0.0) continue;
          const double t = tb - std::sqrt(disc);
          if (t <= 0.0) continue;
          const std::size_t k = static_cast<std::size_t>(py) * W + px;
          if (t < depth[k]) {
            depth[k] = t;
            owner_g[k] = static_cast<int>(g);
            owner_p[k] = static_cast<int>(p);
          }
        }
      }
    }
  }

  std::vector<Hit> hits;
  for (int py = 0; py < H; ++py) {
    for (int px = 0; px < W; ++px) {
      const std::size_t k = static_cast<std::size_t>(py) * W + px;
      if (owner_g[k] < 0) continue;
      const auto& gi = state.garments[static_cast<std::size_t>(owner_g[k])];
      const Vec3 c = gi.positions[static_cast<std::size_t>(owner_p[k])];
      Vec3 q = camera.position + rayDir(px, py) * depth[k];
      // Keep the sample on (not outside) the sphere despite rounding.
      const Vec3 off = q - c;
      const double len = off.norm();
      if (len > r) q = c + off * (r / len);
      hits.push_back({q, {gi.garment_id, static_cast<std::uint32_t>(owner_p[k])}});
    }
  }
  require(!hits.empty(), ErrorCode::kEmptyObservation, "no garment is visible from the camera");

  PointCloudObs obs;
  const std::string snap = snapshot(state);
  obs.scene_ref = fnv1a(snap.data(), snap.size());
  std::vector<Vec3> pts;
  pts.reserve(hits.size());
  for (const Hit& h : hits) pts.push_back(h.point);
  const std::vector<std::uint32_t> idx = farthestPointSample(pts, std::min(n, pts.size()), 0);
  for (std::uint32_t i : idx) {
    obs.points.push_back(hits[i].point);
    obs.provenance.push_back(hits[i].prov);
  }
  // Pad by jittered copies of visible samples, pulled back onto their particle's sphere.
  Rng rng(mixSeed(obs.scene_ref, n));
  while (obs.points.size() < n) {
    const Hit& h = hits[uniformIndex(rng, hits.size())];
    const int g = state.findGarment(h.prov.garment_id);
    const Vec3 c = state.garments[static_cast<std::size_t>(g)].positions[h.prov.particle];
    Vec3 q = h.point + Vec3{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)} * (0.1 * r);
    const Vec3 off = q - c;
    const double len = off.norm();
    if (len > r) q = c + off * (r / len);
    obs.points.push_back(q);
    obs.provenance.push_back(h.prov);
  }
  return obs;
}

std::vector<Vec3> supportLattice(const Container& c, double spacing) {
  require(spacing > 0.0, ErrorCode::kInvalidParameter, "lattice spacing must be > 0");
  double x0, x1, y0, y1;
  const double margin = 0.05;
  switch (c.kind) {
    case ContainerKind::kWashingMachine:
      x0 = -0.7 * c.drum_radius;
      x1 = 0.7 * c.drum_radius;
      y0 = -c.drum_depth + margin;
      y1 = -c.lip_depth - margin;
      break;
    default:
      x0 = -c.half_x + margin;
      x1 = c.half_x - margin;
      y0 = -c.half_y + margin;
      y1 = c.half_y - margin;
      break;
  }
  std::vector<Vec3> out;
  const int nx = static_cast<int>(std::floor((x1 - x0) / spacing + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor((y1 - y0) / spacing + 1e-9)) + 1;
  const double ox = x0 + 0.5 * ((x1 - x0) - (nx - 1) * spacing);
  const double oy = y0 + 0.5 * ((y1 - y0) - (ny - 1) * spacing);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = ox + i * spacing, y = oy + j * spacing;
      out.push_back({x, y, supportHeight(c, x, y)});
    }
  }
  return out;
}

}  // namespace pileaff
