#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iker/reward.hpp"
#include "iker/rng.hpp"
#include "iker/scene.hpp"
#include "iker/simulator.hpp"

// One rollout environment: scene + reward spec + simulator episode. Builds
// the policy observation s_t = (p_e, q_e, p_o, q_o, K_o, K_t), applies the
// grasp directive at reset, terminates on the success latch or the horizon.

namespace iker::rl {

using geom::ActionDelta;
using geom::Pose;
using geom::Vec3;

// number of keypoint slots per policy; pruned slots are zero-filled
inline constexpr int kKeypointSlots = 4;

inline int observation_dim() { return 14 + 6 * kKeypointSlots; }

struct StepResult {
  double reward = 0.0;
  bool terminated = false;  // success latch
  bool truncated = false;   // horizon
  reward::RewardBreakdown breakdown;
};

class TaskEnv {
 public:
  TaskEnv(scene::SceneModel scene_model, reward::RewardSpec spec,
          sim::DomainRandomizationConfig dr, sim::SimConfig sim_config,
          int horizon, sim::ObservationNoiseModel obs_noise = {},
          double contact_start_probability = 0.0)
      : scene_(std::move(scene_model)),
        spec_(std::move(spec)),
        dr_(dr),
        sim_config_(sim_config),
        horizon_(horizon),
        obs_noise_(obs_noise),
        contact_start_probability_(contact_start_probability),
        obs_rng_(0) {
    // fixed slot order: the interaction object's surviving labels, ascending
    for (const auto& [label, local] : spec_.keypoint_locals) {
      (void)local;
      if (static_cast<int>(slot_labels_.size()) < kKeypointSlots)
        slot_labels_.push_back(label);
    }
  }

  const scene::SceneModel& scene() const { return scene_; }
  const reward::RewardSpec& spec() const { return spec_; }
  const sim::SimState& state() const { return state_; }
  const sim::EpisodeParams& params() const { return params_; }
  int horizon() const { return horizon_; }

  std::vector<double> reset(std::uint64_t seed) {
    auto [state, params] = sim::reset(scene_, dr_, sim_config_, seed);
    state_ = state;
    params_ = params;
    if (spec_.directive == Directive::grasp) {
      state_ = sim::try_grasp(state_, spec_.interaction_object, scene_, params_,
                              sim_config_);
    } else if (dr_.enabled && contact_start_probability_ > 0.0) {
      // curriculum for pushing: some episodes begin with the gripper already
      // beside the object at a random bearing
      Rng start_rng(seed ^ 0xc27b1a5d934efb12ull);
      if (start_rng.uniform() < contact_start_probability_) {
        const auto* obj = scene_.find_object(spec_.interaction_object);
        const Pose& pose = state_.object_poses.at(spec_.interaction_object);
        Vec3 half = sim::scaled_half_extents(*obj, params_);
        double bearing = start_rng.uniform(0.0, 6.28318530717958647692);
        double ring = std::max(half.x, half.y) + sim_config_.gripper_radius;
        Vec3 p = pose.position +
                 Vec3{std::cos(bearing) * ring, std::sin(bearing) * ring,
                      start_rng.uniform(-half.z * 0.5, half.z + 0.02)};
        p = scene_.workspace.clamp(p);
        p.z = std::max(p.z, sim_config_.gripper_radius);
        state_.gripper.position = p;
      }
    }
    hold_counter_ = 0;
    elapsed_ = 0;
    done_ = false;
    obs_rng_ = Rng(seed ^ 0x9e3779b97f4a7c15ull);
    return observation();
  }

  StepResult step(const ActionDelta& action) {
    sim::SimState prev = state_;
    state_ = sim::step(state_, action, scene_, params_, sim_config_);
    auto [breakdown, hold] = reward::compute_reward(prev, state_, spec_, hold_counter_);
    hold_counter_ = hold;
    ++elapsed_;

    StepResult result;
    result.reward = breakdown.total;
    result.breakdown = breakdown;
    result.terminated = breakdown.success_latched && !done_;
    if (breakdown.success_latched) done_ = true;
    result.truncated = !result.terminated && elapsed_ >= horizon_;
    return result;
  }

  // Apply a scheduled disturbance mid-episode.
  void teleport_object(const std::string& id, const Pose& pose) {
    const auto* obj = scene_.find_object(id);
    if (obj == nullptr) throw std::runtime_error("unknown object '" + id + "'");
    Pose settled =
        sim::settled_pose(pose, sim::scaled_half_extents(*obj, params_), scene_);
    if (state_.grasped_object == id) state_.grasped_object.reset();
    state_.object_poses[id] = settled;
  }

  void force_release_grasp() {
    state_ = sim::release(state_, scene_, params_, /*intentional=*/false);
  }

  void end_episode_release() {
    state_ = sim::release(state_, scene_, params_, /*intentional=*/true);
  }

  double mean_target_distance() const {
    return reward::mean_target_distance(state_, spec_);
  }
  bool success_latched() const { return done_; }

  // s_t = (p_e, q_e, p_o, q_o, K_o, K_t); object pose and keypoints carry
  // the proxy's observation noise when enabled.
  std::vector<double> observation() {
    std::vector<double> obs;
    obs.reserve(observation_dim());
    const Pose& g = state_.gripper;
    obs.insert(obs.end(), {g.position.x, g.position.y, g.position.z});
    obs.insert(obs.end(),
               {g.orientation.w, g.orientation.x, g.orientation.y, g.orientation.z});

    Pose object = state_.object_poses.at(spec_.interaction_object);
    if (obs_noise_.enabled) {
      object.position += Vec3{obs_rng_.normal(0, obs_noise_.position_sigma),
                              obs_rng_.normal(0, obs_noise_.position_sigma),
                              obs_rng_.normal(0, obs_noise_.position_sigma)};
      Vec3 rot{obs_rng_.normal(0, obs_noise_.orientation_sigma),
               obs_rng_.normal(0, obs_noise_.orientation_sigma),
               obs_rng_.normal(0, obs_noise_.orientation_sigma)};
      object.orientation = (geom::exp_map(rot) * object.orientation).normalized();
    }
    obs.insert(obs.end(), {object.position.x, object.position.y, object.position.z});
    obs.insert(obs.end(), {object.orientation.w, object.orientation.x,
                           object.orientation.y, object.orientation.z});

    for (int s = 0; s < kKeypointSlots; ++s) {
      if (s < static_cast<int>(slot_labels_.size())) {
        Vec3 world =
            geom::transform_point(object, spec_.keypoint_locals.at(slot_labels_[s]));
        obs.insert(obs.end(), {world.x, world.y, world.z});
      } else {
        obs.insert(obs.end(), {0.0, 0.0, 0.0});
      }
    }
    for (int s = 0; s < kKeypointSlots; ++s) {
      auto it = s < static_cast<int>(slot_labels_.size())
                    ? spec_.targets.find(slot_labels_[s])
                    : spec_.targets.end();
      if (it != spec_.targets.end()) {
        obs.insert(obs.end(), {it->second.x, it->second.y, it->second.z});
      } else {
        obs.insert(obs.end(), {0.0, 0.0, 0.0});
      }
    }
    return obs;
  }

 private:
  scene::SceneModel scene_;
  reward::RewardSpec spec_;
  sim::DomainRandomizationConfig dr_;
  sim::SimConfig sim_config_;
  int horizon_;
  sim::ObservationNoiseModel obs_noise_;
  double contact_start_probability_ = 0.0;
  std::vector<int> slot_labels_;

  sim::SimState state_;
  sim::EpisodeParams params_;
  int hold_counter_ = 0;
  int elapsed_ = 0;
  bool done_ = false;
  Rng obs_rng_;
};

}  // namespace iker::rl
