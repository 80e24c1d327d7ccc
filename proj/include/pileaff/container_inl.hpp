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

#include <algorithm>
#include <cmath>

namespace pileaff {

namespace detail {

/// Signed distance from p to a solid box with the outward unit normal at the closest point.
inline double boxDistance(const Aabb& b, const Vec3& p, Vec3& normal) {
  const Vec3 c = b.center();
  const Vec3 h = (b.hi - b.lo) * 0.5;
  const Vec3 q{std::abs(p.x - c.x) - h.x, std::abs(p.y - c.y) - h.y, std::abs(p.z - c.z) - h.z};
  const Vec3 sgn{p.x >= c.x ? 1.0 : -1.0, p.y >= c.y ? 1.0 : -1.0, p.z >= c.z ? 1.0 : -1.0};
  if (q.x > 0.0 || q.y > 0.0 || q.z > 0.0) {
    const Vec3 o{std::max(q.x, 0.0) * sgn.x, std::max(q.y, 0.0) * sgn.y, std::max(q.z, 0.0) * sgn.z};
    const double d = o.norm();
    normal = o / d;
    return d;
  }
  if (q.x >= q.y && q.x >= q.z) {
    normal = Vec3{sgn.x, 0, 0};
    return q.x;
  }
  if (q.y >= q.z) {
    normal = Vec3{0, sgn.y, 0};
    return q.y;
  }
  normal = Vec3{0, 0, sgn.z};
  return q.z;
}

}  // namespace detail

template <typename Fn>
void forEachSurfaceContact(const Container& c, const std::vector<Aabb>& boxes, const Vec3& p, double radius,
                           Fn&& fn) {
  if (p.z < radius) fn(SurfaceContact{Vec3{0, 0, 1}, radius - p.z});
  for (const Aabb& b : boxes) {
    if (p.x < b.lo.x - radius || p.x > b.hi.x + radius || p.y < b.lo.y - radius || p.y > b.hi.y + radius ||
        p.z < b.lo.z - radius || p.z > b.hi.z + radius) {
      continue;
    }
    Vec3 n;
    const double d = detail::boxDistance(b, p, n);
    if (d < radius) fn(SurfaceContact{n, radius - d});
  }
  if (c.kind != ContainerKind::kWashingMachine) return;

  // Drum shell, back wall and the front panel with its door lip, each a separate penalty surface.
  const double R_open = c.drum_radius - c.lip_height;
  const double dz = p.z - c.drum_axis_height;
  const double rho = std::sqrt(p.x * p.x + dz * dz);
  const Vec3 radial_out = rho > 1e-12 ? Vec3{p.x / rho, 0.0, dz / rho} : Vec3{0, 0, -1};
  if (p.y <= -c.lip_depth && c.drum_radius - rho < radius) {
    fn(SurfaceContact{-radial_out, radius - (c.drum_radius - rho)});
  }
  if (p.y + c.drum_depth < radius) fn(SurfaceContact{Vec3{0, 1, 0}, radius - (p.y + c.drum_depth)});

  // Panel plus lip: in (rho, y) it is the half strip rho >= R_open, -lip_depth <= y <= 0.
  const double a = R_open - rho;
  const double b = std::max(-c.lip_depth - p.y, p.y);
  const double sy = p.y > -0.5 * c.lip_depth ? 1.0 : -1.0;
  double d, g_rho, g_y;
  if (a > 0.0 || b > 0.0) {
    const double oa = std::max(a, 0.0), ob = std::max(b, 0.0);
    d = std::sqrt(oa * oa + ob * ob);
    g_rho = -oa / d;
    g_y = sy * ob / d;
  } else if (a >= b) {
    d = a;
    g_rho = -1.0;
    g_y = 0.0;
  } else {
    d = b;
    g_rho = 0.0;
    g_y = sy;
  }
  if (d < radius) fn(SurfaceContact{radial_out * g_rho + Vec3{0, g_y, 0}, radius - d});
}

}  // namespace pileaff
