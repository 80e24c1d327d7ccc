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
#include <optional>
#include <string>
#include <vector>

#include "pileaff/common.hpp"
#include "pileaff/container.hpp"
#include "pileaff/garment.hpp"

namespace pileaff {

struct SimParams {
  double dt = 0.005;  // s, one step
  int substeps = 4;
  double gravity = 9.8;
  double spring_damping = 0.3;     // N*s/m along the spring axis
  double air_damping = 0.1;        // 1/s
  double contact_radius = 0.025;   // m
  double contact_stiffness = 1000.0;
  double contact_ramp = 0.004;      // m; contact force grows quadratically up to this depth, then linearly
  double contact_damping = 2.0;    // N*s/m along the contact normal
  double friction_mu_surface = 0.25;
  double friction_mu_particle = 0.6;
  double settle_ke_tol = 1e-5;     // J
  int settle_max_steps = 6000;
  double max_speed = 100.0;        // m/s; faster particles count as divergence

  void validate() const;
};

/// Kinematic grasp: attached particles follow the gripper at fixed offsets.
struct Attachment {
  std::uint32_t garment_id = 0;
  std::vector<std::uint32_t> particles;
  std::vector<Vec3> offsets;
  Vec3 gripper;
  Vec3 gripper_velocity;

  bool operator==(const Attachment&) const = default;
};

struct SceneState {
  Container container;
  std::vector<GarmentInstance> garments;
  double sim_time = 0.0;
  std::uint64_t step_count = 0;
  Rng rng;
  std::optional<Attachment> attachment;

  std::size_t particleCount() const;
  /// Index into `garments`, or -1.
  int findGarment(std::uint32_t garment_id) const;
};

/// Advances one step of `params.substeps` semi-implicit Euler sub-iterations.
/// Throws Error(kNumerical) on non-finite or runaway state.
void step(SceneState& state, const SimParams& params);

struct SettleResult {
  bool settled = false;
  int steps = 0;
  double kinetic_energy = 0.0;
};

/// Steps until kinetic energy drops below settle_ke_tol (checked before every step).
SettleResult settle(SceneState& state, const SimParams& params);

struct EnergyBreakdown {
  double kinetic = 0.0;
  double gravity = 0.0;
  double spring = 0.0;
  double contact = 0.0;
  double total() const { return kinetic + gravity + spring + contact; }
};

double kineticEnergy(const SceneState& state);
/// Normal contact force magnitude and stored energy at penetration depth pen.
double contactForce(const SimParams& params, double pen);
double contactEnergy(const SimParams& params, double pen);
EnergyBreakdown mechanicalEnergy(const SceneState& state, const SimParams& params);

/// Symmetric matrix (row-major, G x G) of inter-garment particle pairs closer than 2 * contact_radius.
std::vector<std::uint32_t> contactGraph(const SceneState& state, double contact_radius);
std::uint64_t contactEdgeCount(const std::vector<std::uint32_t>& graph, std::size_t num_garments);

/// Versioned little-endian blob; restore(snapshot(s)) reproduces s bit-for-bit.
std::string snapshot(const SceneState& state);
SceneState restore(std::string_view blob);

/// Bitwise comparison of dynamic state (positions, velocities, time, rng, attachment).
bool bitIdentical(const SceneState& a, const SceneState& b);

}  // namespace pileaff
