#pragma once

#include <map>
#include <string>
#include <vector>

#include "iker/directive.hpp"
#include "iker/simulator.hpp"

// The keypoint reward: five weighted terms evaluated per control step from
// keypoint positions, targets, and the simulator's violation signals.

namespace iker::reward {

using geom::Vec3;
using iker::Directive;
using sim::SimState;

struct RewardWeights {
  double alpha_dist = 1.0;
  double alpha_dir = 0.5;
  double alpha_align = 1.0;
  double alpha_bonus = 10.0;
  double alpha_penalty = 1.0;  // applied with negative sign
};

struct RewardSpec {
  std::map<int, Vec3> targets;  // keypoint label -> goal position, world
  std::string interaction_object;
  Directive directive = Directive::push;
  // local coordinates of the interaction object's surviving keypoints
  std::map<int, Vec3> keypoint_locals;
  double success_threshold = 0.05;
  int hold_steps = 10;
  RewardWeights weights;
  // just above the largest per-step displacement the clipped action
  // allows (0.02 * sqrt(3)); full-speed motion is intended, not excessive
  double move_threshold = 0.035;
  double force_threshold = 0.5;
  double max_translation_step = 0.02;  // normalizes the direction term
};

struct RewardBreakdown {
  double r_dist = 0.0;
  double r_dir = 0.0;
  double r_align = 0.0;
  double r_bonus = 0.0;
  double r_penalty = 0.0;
  double total = 0.0;
  double mean_target_distance = 0.0;
  bool success_latched = false;
};

// World positions of the target-labeled keypoints in a state. Throws
// "target references pruned keypoint" when a target label has no local.
std::map<int, Vec3> target_keypoint_positions(const SimState& state,
                                              const RewardSpec& spec);

double mean_target_distance(const SimState& state, const RewardSpec& spec);

// One reward evaluation. hold_counter is caller-owned per-environment
// state; it saturates at hold_steps once the bonus fires so the bonus is
// emitted at most once per episode.
std::pair<RewardBreakdown, int> compute_reward(const SimState& prev,
                                               const SimState& cur,
                                               const RewardSpec& spec,
                                               int hold_counter);

// Episode-level success: mean final keypoint distance within threshold.
bool check_success(const std::vector<SimState>& history, const RewardSpec& spec);

}  // namespace iker::reward
