#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iker/geometry.hpp"
#include "iker/scene.hpp"

// Quasi-static tabletop physics: kinematic carrying while grasped,
// penetration-resolution pushing otherwise, surface snapping instead of
// flight. Deterministic by construction; all per-episode randomness is
// sampled once at reset into EpisodeParams.

namespace iker::sim {

using geom::ActionDelta;
using geom::Pose;
using geom::Quat;
using geom::Vec3;
using scene::SceneModel;

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

struct DomainRandomizationConfig {
  bool enabled = true;
  Range scale{0.8, 1.2};
  Range mass{0.3, 2.0};
  Range friction{0.3, 1.8};
  Range restitution{0.0, 1.0};
  Range compliance{0.0, 1.0};
  Range com_offset{-0.05, 0.05};
  Range initial_position{-0.02, 0.02};
  Range initial_orientation{-0.05, 0.05};
  Range grasp_position{-0.01, 0.01};
  Range grasp_orientation{-0.2, 0.2};
  // gripper start pose varies broadly so rollouts begin all over the
  // workspace; contact-rich starts are what make pushing learnable
  Range gripper_home_xy{-0.22, 0.22};
  Range gripper_home_z{-0.09, 0.12};
};

// Evaluation-time stand-in for the real world: every range keeps its
// width but the center moves by +25% of it, clamped to physical validity.
DomainRandomizationConfig deployment_proxy_of(const DomainRandomizationConfig& dr);

// Pose noise applied to object observations fed to the policy (not to the
// underlying state) when evaluating in the deployment proxy.
struct ObservationNoiseModel {
  bool enabled = false;
  double position_sigma = 0.003;
  double orientation_sigma = 0.02;
};

struct PerObjectParams {
  double scale = 1.0;
  double mass = 1.15;
  double friction = 1.05;
  double restitution = 0.5;
  double compliance = 0.5;
  Vec3 com_offset;
  // placement noise is per object so reset() can resample overlapping
  // layouts independently
  Vec3 position_noise;
  double orientation_noise = 0.0;
};

struct EpisodeParams {
  std::map<std::string, PerObjectParams> objects;
  Vec3 gripper_position_noise;
  Vec3 grasp_position_noise;
  double grasp_orientation_noise = 0.0;
};

struct ViolationAccumulators {
  double contact_impulse_sum = 0.0;
  bool dropped = false;
  bool out_of_workspace = false;
};

struct SimState {
  Pose gripper;
  bool gripper_open = false;
  std::optional<std::string> grasped_object;
  Pose grasp_transform;  // object = gripper o grasp_transform
  bool pending_drop = false;
  std::map<std::string, Pose> object_poses;
  int step_count = 0;
  ViolationAccumulators violations;
};

struct SimConfig {
  double max_translation_step = 0.02;  // m per control step at 10 Hz
  double max_rotation_step = 0.1;      // rad per control step
  double gripper_radius = 0.02;
  Vec3 gripper_home{0.0, 0.0, 0.2};
  double gripper_home_yaw = 0.0;
  double penetration_tolerance = 1e-4;
  // yaw applied to a pushed object per unit of (lever arm x displacement)
  double rotation_gain = 50.0;
  double max_push_rotation = 0.15;
  double slip_min = 0.3;
  double friction_reference = 1.8;
  double compliance_slip_jitter = 0.1;
  // penalty accumulator: resolution magnitude x mass/restitution/compliance
  // factor; scaled so a normal task-length push stays well under the
  // force threshold and only sustained grinding crosses it
  double force_accumulator_scale = 0.25;
  double force_mass_reference = 1.15;
  double restitution_force_gain = 0.2;
  double compliance_force_gain = 0.2;
  int max_placement_attempts = 20;
};

// Fraction of gripper motion transferred to a pushed object.
double slip_factor(double friction, const SimConfig& config);
double effective_slip(const PerObjectParams& obj, const SimConfig& config);

// Scaled half extents of an object under its episode scale.
Vec3 scaled_half_extents(const scene::ObjectModel& obj, const EpisodeParams& params);

// World-frame axis-aligned half extents of the oriented box.
Vec3 world_aabb_half_extents(const Quat& orientation, const Vec3& half_extents);

// Place objects and gripper with sampled noise; deterministic in seed.
// With dr.enabled = false all noise is zero and params sit at range
// midpoints. Throws "unplaceable scene" if objects still overlap after
// max_placement_attempts resamples.
std::pair<SimState, EpisodeParams> reset(const SceneModel& scene,
                                         const DomainRandomizationConfig& dr,
                                         const SimConfig& config,
                                         std::uint64_t seed);

// One 10 Hz control step: clip the action, integrate the gripper, carry or
// push, settle free objects, accumulate violations.
SimState step(const SimState& state, const ActionDelta& action,
              const SceneModel& scene, const EpisodeParams& params,
              const SimConfig& config);

// Heuristic top-down grasp at the object center, aligned to the shorter
// horizontal axis, perturbed by the episode's grasp noise. Does not move
// any object; on failure the gripper still teleports to the attempted pose.
SimState try_grasp(const SimState& state, const std::string& target,
                   const SceneModel& scene, const EpisodeParams& params,
                   const SimConfig& config);

// Detach the grasped object and settle it onto the support surface.
// Unintentional release (disturbance) raises the dropped violation.
SimState release(const SimState& state, const SceneModel& scene,
                 const EpisodeParams& params, bool intentional);

// Snap a single object to rest: yaw-only orientation, z on its support.
Pose settled_pose(const Pose& pose, const Vec3& scaled_half,
                  const SceneModel& scene);

}  // namespace iker::sim
