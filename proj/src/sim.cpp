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

#include "pileaff/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "pileaff/bytes.hpp"

namespace pileaff {

void SimParams::validate() const {
  require(dt > 0.0 && std::isfinite(dt), ErrorCode::kInvalidParameter, "dt must be > 0");
  require(substeps >= 1, ErrorCode::kInvalidParameter, "substeps must be >= 1");
  for (double v : {gravity, spring_damping, air_damping, contact_radius, contact_stiffness, contact_ramp, contact_damping,
                   friction_mu_surface, friction_mu_particle, settle_ke_tol}) {
    require(v >= 0.0 && std::isfinite(v), ErrorCode::kInvalidParameter, "physical constants must be >= 0");
  }
  require(contact_radius > 0.0, ErrorCode::kInvalidParameter, "contact_radius must be > 0");
  require(settle_max_steps >= 0, ErrorCode::kInvalidParameter, "settle_max_steps must be >= 0");
}

std::size_t SceneState::particleCount() const {
  std::size_t n = 0;
  for (const auto& g : garments) n += g.size();
  return n;
}

int SceneState::findGarment(std::uint32_t garment_id) const {
  for (std::size_t i = 0; i < garments.size(); ++i) {
    if (garments[i].garment_id == garment_id) return static_cast<int>(i);
  }
  return -1;
}

namespace {

/// Fixed-size spatial hash over a flat particle array. Bucket contents keep particle order.
class SpatialHash {
 public:
  SpatialHash(double cell, std::size_t table_size) : cell_(cell), start_(table_size + 1), keys_() {}

  void build(const std::vector<Vec3>& x) {
    const std::size_t table = start_.size() - 1;
    keys_.resize(x.size());
    std::fill(start_.begin(), start_.end(), 0u);
    for (std::size_t i = 0; i < x.size(); ++i) {
      keys_[i] = bucket(cellOf(x[i]));
      ++start_[keys_[i] + 1];
    }
    for (std::size_t b = 0; b < table; ++b) start_[b + 1] += start_[b];
    items_.resize(x.size());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < x.size(); ++i) items_[fill[keys_[i]]++] = static_cast<std::uint32_t>(i);
  }

  /// Calls fn(j) for every particle j > i sharing one of the 27 neighbor buckets of i (each j once).
  template <typename Fn>
  void forEachCandidate(const Vec3& xi, std::uint32_t i, Fn&& fn) const {
    const auto c = cellOf(xi);
    std::array<std::uint32_t, 27> seen{};
    int n_seen = 0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const std::uint32_t b = bucket({c[0] + dx, c[1] + dy, c[2] + dz});
          if (std::find(seen.begin(), seen.begin() + n_seen, b) != seen.begin() + n_seen) continue;
          seen[static_cast<std::size_t>(n_seen++)] = b;
          for (std::uint32_t k = start_[b]; k < start_[b + 1]; ++k) {
            const std::uint32_t j = items_[k];
            if (j > i) fn(j);
          }
        }
      }
    }
  }

 private:
  std::array<std::int64_t, 3> cellOf(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cell_)), static_cast<std::int64_t>(std::floor(p.y / cell_)),
            static_cast<std::int64_t>(std::floor(p.z / cell_))};
  }
  std::uint32_t bucket(const std::array<std::int64_t, 3>& c) const {
    const auto h = static_cast<std::uint64_t>(c[0] * 73856093LL) ^ static_cast<std::uint64_t>(c[1] * 19349663LL) ^
                   static_cast<std::uint64_t>(c[2] * 83492791LL);
    return static_cast<std::uint32_t>(h % (start_.size() - 1));
  }

  double cell_;
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> keys_;
  std::vector<std::uint32_t> items_;
};

constexpr std::size_t kHashTable = 4096;

struct ContactRecord {
  std::uint32_t i;
  std::int64_t j;  // -1 for a surface contact
  Vec3 normal;     // toward i
  double normal_force;
};

/// Flat view of all particles, in garment order then particle order.
struct FlatScene {
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<double> mass;
  std::vector<std::uint32_t> garment;  // index into SceneState::garments
  std::vector<std::uint32_t> offset;   // first flat index per garment
  std::vector<char> attached;
  std::vector<Vec3> attach_offset;

  explicit FlatScene(const SceneState& s) {
    const std::size_t n = s.particleCount();
    x.reserve(n);
    v.reserve(n);
    mass.reserve(n);
    garment.reserve(n);
    for (std::size_t g = 0; g < s.garments.size(); ++g) {
      const auto& gi = s.garments[g];
      offset.push_back(static_cast<std::uint32_t>(x.size()));
      for (std::size_t p = 0; p < gi.size(); ++p) {
        x.push_back(gi.positions[p]);
        v.push_back(gi.velocities[p]);
        mass.push_back(gi.tmpl->particle_mass);
        garment.push_back(static_cast<std::uint32_t>(g));
      }
    }
    attached.assign(n, 0);
    attach_offset.assign(n, Vec3{});
    if (s.attachment) {
      const int g = s.findGarment(s.attachment->garment_id);
      require(g >= 0, ErrorCode::kInvalidParameter, "attachment references a missing garment");
      for (std::size_t k = 0; k < s.attachment->particles.size(); ++k) {
        const std::size_t idx = offset[static_cast<std::size_t>(g)] + s.attachment->particles[k];
        attached[idx] = 1;
        attach_offset[idx] = s.attachment->offsets[k];
      }
    }
  }

  void writeBack(SceneState& s) const {
    for (std::size_t g = 0; g < s.garments.size(); ++g) {
      auto& gi = s.garments[g];
      for (std::size_t p = 0; p < gi.size(); ++p) {
        gi.positions[p] = x[offset[g] + p];
        gi.velocities[p] = v[offset[g] + p];
      }
    }
  }
};

template <typename Fn>
void forEachPairContact(const FlatScene& f, const SpatialHash& hash, double radius, Fn&& fn) {
  const double reach = 2.0 * radius;
  const double reach2 = reach * reach;
  for (std::uint32_t i = 0; i < f.x.size(); ++i) {
    hash.forEachCandidate(f.x[i], i, [&](std::uint32_t j) {
      if (f.garment[i] == f.garment[j]) return;
      const Vec3 d = f.x[i] - f.x[j];
      const double d2 = d.squaredNorm();
      if (d2 >= reach2) return;
      const double dist = std::sqrt(d2);
      const Vec3 n = dist > 1e-12 ? d / dist : Vec3{0, 0, 1};
      fn(i, j, n, reach - dist);
    });
  }
}

}  // namespace

double contactForce(const SimParams& p, double pen) {
  const double k = p.contact_stiffness, p0 = p.contact_ramp;
  if (pen <= 0.0) return 0.0;
  if (pen < p0) return k * pen * pen / (2.0 * p0);  // false when p0 == 0
  return k * (pen - 0.5 * p0);
}

double contactEnergy(const SimParams& p, double pen) {
  const double k = p.contact_stiffness, p0 = p.contact_ramp;
  if (pen <= 0.0) return 0.0;
  if (pen < p0) return k * pen * pen * pen / (6.0 * p0);
  return k * p0 * p0 / 6.0 + 0.5 * k * (pen * pen - p0 * pen);
}

namespace {

[[noreturn]] void divergence(const SceneState& s, const FlatScene& f, std::size_t idx) {
  const std::uint32_t g = f.garment[idx];
  std::ostringstream os;
  os << "numerical divergence at step " << s.step_count << ": garment " << s.garments[g].garment_id
     << " particle " << (idx - f.offset[g]);
  fail(ErrorCode::kNumerical, os.str());
}

}  // namespace

void step(SceneState& state, const SimParams& params) {
  const double h = params.dt / params.substeps;
  const double r = params.contact_radius;
  const double cc = params.contact_damping;
  FlatScene f(state);
  const std::vector<Aabb> boxes = solidBoxes(state.container);
  const std::size_t n = f.x.size();
  std::vector<Vec3> force(n);
  std::vector<ContactRecord> contacts;
  std::vector<int> contact_count(n);
  std::vector<Vec3> dv(n);
  SpatialHash hash(2.0 * r, kHashTable);
  Vec3 gripper = state.attachment ? state.attachment->gripper : Vec3{};
  const Vec3 gripper_v = state.attachment ? state.attachment->gripper_velocity : Vec3{};

  for (int sub = 0; sub < params.substeps; ++sub) {
    contacts.clear();
    for (std::size_t i = 0; i < n; ++i) {
      force[i] = Vec3{0.0, 0.0, -f.mass[i] * params.gravity} - f.v[i] * (params.air_damping * f.mass[i]);
    }
    for (std::size_t g = 0; g < state.garments.size(); ++g) {
      const auto& tmpl = *state.garments[g].tmpl;
      const std::uint32_t o = f.offset[g];
      for (const Spring& s : tmpl.springs) {
        const std::uint32_t i = o + s.i, j = o + s.j;
        const Vec3 d = f.x[j] - f.x[i];
        const double len = d.norm();
        if (len < 1e-12) continue;
        const Vec3 u = d / len;
        const double mag =
            tmpl.stiffness(s.kind) * (len - s.rest) + params.spring_damping * (f.v[j] - f.v[i]).dot(u);
        force[i] += u * mag;
        force[j] -= u * mag;
      }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      forEachSurfaceContact(state.container, boxes, f.x[i], r, [&](const SurfaceContact& c) {
        const double fn = contactForce(params, c.penetration);
        force[i] += c.normal * fn;
        contacts.push_back({i, -1, c.normal, fn});
      });
    }
    hash.build(f.x);
    forEachPairContact(f, hash, r, [&](std::uint32_t i, std::uint32_t j, const Vec3& nrm, double pen) {
      const double fn = contactForce(params, pen);
      force[i] += nrm * fn;
      force[j] -= nrm * fn;
      contacts.push_back({i, static_cast<std::int64_t>(j), nrm, fn});
    });

    for (std::size_t i = 0; i < n; ++i) {
      if (!f.attached[i]) f.v[i] += force[i] * (h / f.mass[i]);
    }

    // Contact damping and Coulomb friction as impulses on the predicted velocities. Each pass computes
    // all impulses from the same velocities and splits them evenly over a particle's contacts; the
    // damping impulse never reverses the normal relative velocity, friction never reverses sliding.
    std::fill(contact_count.begin(), contact_count.end(), 0);
    for (const ContactRecord& c : contacts) {
      ++contact_count[c.i];
      if (c.j >= 0) ++contact_count[static_cast<std::size_t>(c.j)];
    }
    for (int pass = 0; pass < 2; ++pass) {
      std::fill(dv.begin(), dv.end(), Vec3{});
      for (const ContactRecord& c : contacts) {
        const bool surface = c.j < 0;
        const std::size_t j = surface ? 0 : static_cast<std::size_t>(c.j);
        const bool fi = !f.attached[c.i];
        const bool fj = !surface && !f.attached[j];
        if (!fi && !fj) continue;
        const double inv_i = fi ? 1.0 / f.mass[c.i] : 0.0;
        const double inv_j = fj ? 1.0 / f.mass[j] : 0.0;
        const int share = std::max(contact_count[c.i], surface ? 1 : contact_count[j]);
        const Vec3 rel = surface ? f.v[c.i] : f.v[c.i] - f.v[j];
        const double vn = rel.dot(c.normal);
        Vec3 impulse;
        if (pass == 0) {
          const double jn = std::min(cc * h * std::abs(vn), std::abs(vn) / (inv_i + inv_j)) / share;
          impulse = c.normal * (vn > 0.0 ? -jn : jn);
        } else {
          const Vec3 vt = rel - c.normal * vn;
          const double speed = vt.norm();
          if (speed <= 0.0) continue;
          const double mu = surface ? params.friction_mu_surface : params.friction_mu_particle;
          const double jt = std::min(speed / (inv_i + inv_j), mu * c.normal_force * h) / share;
          impulse = vt * (-jt / speed);
        }
        dv[c.i] += impulse * inv_i;
        if (!surface) dv[j] -= impulse * inv_j;
      }
      for (std::size_t i = 0; i < n; ++i) f.v[i] += dv[i];
    }
    gripper += gripper_v * h;
    for (std::size_t i = 0; i < n; ++i) {
      if (f.attached[i]) {
        f.v[i] = gripper_v;
        f.x[i] = gripper + f.attach_offset[i];
      } else {
        f.x[i] += f.v[i] * h;
      }
      if (!f.x[i].finite() || !f.v[i].finite() || f.v[i].squaredNorm() > params.max_speed * params.max_speed) {
        divergence(state, f, i);
      }
    }
  }
  f.writeBack(state);
  if (state.attachment) state.attachment->gripper = gripper;
  state.sim_time += params.dt;
  ++state.step_count;
}

double kineticEnergy(const SceneState& state) {
  double ke = 0.0;
  for (const auto& g : state.garments) {
    double s = 0.0;
    for (const auto& v : g.velocities) s += v.squaredNorm();
    ke += 0.5 * g.tmpl->particle_mass * s;
  }
  return ke;
}

SettleResult settle(SceneState& state, const SimParams& params) {
  SettleResult res;
  for (;;) {
    res.kinetic_energy = kineticEnergy(state);
    if (res.kinetic_energy < params.settle_ke_tol) {
      res.settled = true;
      return res;
    }
    if (res.steps >= params.settle_max_steps) return res;
    step(state, params);
    ++res.steps;
  }
}

EnergyBreakdown mechanicalEnergy(const SceneState& state, const SimParams& params) {
  EnergyBreakdown e;
  e.kinetic = kineticEnergy(state);
  const double r = params.contact_radius;
  const std::vector<Aabb> boxes = solidBoxes(state.container);
  for (const auto& g : state.garments) {
    const auto& t = *g.tmpl;
    for (const auto& p : g.positions) {
      e.gravity += t.particle_mass * params.gravity * p.z;
      forEachSurfaceContact(state.container, boxes, p, r,
                            [&](const SurfaceContact& c) { e.contact += contactEnergy(params, c.penetration); });
    }
    for (const Spring& s : t.springs) {
      const double stretch = (g.positions[s.j] - g.positions[s.i]).norm() - s.rest;
      e.spring += 0.5 * t.stiffness(s.kind) * stretch * stretch;
    }
  }
  FlatScene f(state);
  SpatialHash hash(2.0 * r, kHashTable);
  hash.build(f.x);
  forEachPairContact(f, hash, r,
                     [&](std::uint32_t, std::uint32_t, const Vec3&, double pen) { e.contact += contactEnergy(params, pen); });
  return e;
}

std::vector<std::uint32_t> contactGraph(const SceneState& state, double contact_radius) {
  const std::size_t g = state.garments.size();
  std::vector<std::uint32_t> m(g * g, 0);
  if (g < 2) return m;
  FlatScene f(state);
  SpatialHash hash(2.0 * contact_radius, kHashTable);
  hash.build(f.x);
  forEachPairContact(f, hash, contact_radius, [&](std::uint32_t i, std::uint32_t j, const Vec3&, double) {
    const std::size_t a = f.garment[i], b = f.garment[j];
    ++m[a * g + b];
    ++m[b * g + a];
  });
  return m;
}

std::uint64_t contactEdgeCount(const std::vector<std::uint32_t>& graph, std::size_t num_garments) {
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < num_garments; ++a) {
    for (std::size_t b = a + 1; b < num_garments; ++b) total += graph[a * num_garments + b];
  }
  return total;
}

namespace {

constexpr char kPileMagic[4] = {'P', 'I', 'L', 'E'};
constexpr std::uint32_t kPileVersion = 1;

void putVec(ByteWriter& w, const Vec3& v) {
  w.put(v.x);
  w.put(v.y);
  w.put(v.z);
}
Vec3 getVec(ByteReader& r) {
  Vec3 v;
  v.x = r.get<double>();
  v.y = r.get<double>();
  v.z = r.get<double>();
  return v;
}

}  // namespace

std::string snapshot(const SceneState& s) {
  ByteWriter w;
  w.putBytes(std::string_view(kPileMagic, 4));
  w.put(kPileVersion);
  const Container& c = s.container;
  w.put(static_cast<std::uint8_t>(c.kind));
  for (double v : {c.half_x, c.half_y, c.floor_height, c.rim_height, c.back_height, c.wall_thickness, c.drum_radius,
                   c.drum_depth, c.drum_axis_height, c.panel_half_width, c.panel_height, c.lip_height, c.lip_depth}) {
    w.put(v);
  }
  putVec(w, c.exit_region.lo);
  putVec(w, c.exit_region.hi);
  w.put(s.sim_time);
  w.put(s.step_count);
  w.put(static_cast<std::uint32_t>(s.garments.size()));
  for (const auto& g : s.garments) {
    const auto& t = *g.tmpl;
    w.put(g.garment_id);
    w.putString(t.template_id);
    w.put(static_cast<std::uint8_t>(t.category));
    w.put(static_cast<std::uint32_t>(t.rows));
    w.put(static_cast<std::uint32_t>(t.cols));
    for (double v : {t.spacing, t.particle_mass, t.k_struct, t.k_shear, t.k_bend}) w.put(v);
    w.put(static_cast<std::uint32_t>(g.size()));
    for (const auto& p : g.positions) putVec(w, p);
    for (const auto& v : g.velocities) putVec(w, v);
  }
  w.put(static_cast<std::uint8_t>(s.attachment ? 1 : 0));
  if (s.attachment) {
    const auto& a = *s.attachment;
    w.put(a.garment_id);
    w.put(static_cast<std::uint32_t>(a.particles.size()));
    for (auto p : a.particles) w.put(p);
    for (const auto& o : a.offsets) putVec(w, o);
    putVec(w, a.gripper);
    putVec(w, a.gripper_velocity);
  }
  std::ostringstream rng;
  rng << s.rng;
  w.putString(rng.str());
  return w.take();
}

SceneState restore(std::string_view blob) {
  ByteReader r(blob);
  if (r.getBytes(4) != std::string_view(kPileMagic, 4)) fail(ErrorCode::kFormat, "scene blob: bad magic");
  if (r.get<std::uint32_t>() != kPileVersion) fail(ErrorCode::kFormat, "scene blob: unsupported version");
  SceneState s;
  Container& c = s.container;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 2) fail(ErrorCode::kFormat, "scene blob: bad container kind");
  c.kind = static_cast<ContainerKind>(kind);
  for (double* v : {&c.half_x, &c.half_y, &c.floor_height, &c.rim_height, &c.back_height, &c.wall_thickness,
                    &c.drum_radius, &c.drum_depth, &c.drum_axis_height, &c.panel_half_width, &c.panel_height,
                    &c.lip_height, &c.lip_depth}) {
    *v = r.get<double>();
  }
  c.exit_region.lo = getVec(r);
  c.exit_region.hi = getVec(r);
  s.sim_time = r.get<double>();
  s.step_count = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  if (count > 64) fail(ErrorCode::kFormat, "scene blob: implausible garment count");
  for (std::uint32_t k = 0; k < count; ++k) {
    GarmentInstance g;
    g.garment_id = r.get<std::uint32_t>();
    std::string id = r.getString(256);
    const auto cat = r.get<std::uint8_t>();
    if (cat >= kNumCategories) fail(ErrorCode::kFormat, "scene blob: bad category");
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    StiffnessProfile prof;
    const double spacing = r.get<double>();
    prof.particle_mass = r.get<double>();
    prof.k_struct = r.get<double>();
    prof.k_shear = r.get<double>();
    prof.k_bend = r.get<double>();
    const auto p = r.get<std::uint32_t>();
    if (rows > 4096 || cols > 4096 || p != rows * cols) fail(ErrorCode::kFormat, "scene blob: particle count mismatch");
    try {
      g.tmpl = std::make_shared<const GarmentTemplate>(makeTemplate(static_cast<Category>(cat), static_cast<int>(rows),
                                                                    static_cast<int>(cols), spacing, prof, id));
    } catch (const Error& e) {
      fail(ErrorCode::kFormat, std::string("scene blob: bad template: ") + e.what());
    }
    g.positions.resize(p);
    g.velocities.resize(p);
    for (auto& x : g.positions) x = getVec(r);
    for (auto& v : g.velocities) v = getVec(r);
    s.garments.push_back(std::move(g));
  }
  if (r.get<std::uint8_t>() != 0) {
    Attachment a;
    a.garment_id = r.get<std::uint32_t>();
    const auto n = r.get<std::uint32_t>();
    const int g = s.findGarment(a.garment_id);
    if (g < 0 || n == 0 || n > s.garments[static_cast<std::size_t>(g)].size()) {
      fail(ErrorCode::kFormat, "scene blob: bad attachment");
    }
    a.particles.resize(n);
    for (auto& p : a.particles) {
      p = r.get<std::uint32_t>();
      if (p >= s.garments[static_cast<std::size_t>(g)].size()) fail(ErrorCode::kFormat, "scene blob: bad attachment");
    }
    a.offsets.resize(n);
    for (auto& o : a.offsets) o = getVec(r);
    a.gripper = getVec(r);
    a.gripper_velocity = getVec(r);
    s.attachment = std::move(a);
  }
  std::istringstream rng(r.getString(1 << 16));
  rng >> s.rng;
  if (rng.fail()) fail(ErrorCode::kFormat, "scene blob: bad rng state");
  if (!r.atEnd()) fail(ErrorCode::kFormat, "scene blob: trailing bytes");
  return s;
}

bool bitIdentical(const SceneState& a, const SceneState& b) {
  return snapshot(a) == snapshot(b);
}

}  // namespace pileaff
