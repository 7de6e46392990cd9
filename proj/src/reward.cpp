#include "iker/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace iker::reward {

std::map<int, Vec3> target_keypoint_positions(const SimState& state,
                                              const RewardSpec& spec) {
  auto pose_it = state.object_poses.find(spec.interaction_object);
  if (pose_it == state.object_poses.end())
    throw std::runtime_error("unknown interaction object '" +
                             spec.interaction_object + "'");
  std::map<int, Vec3> out;
  for (const auto& [label, target] : spec.targets) {
    (void)target;
    auto it = spec.keypoint_locals.find(label);
    if (it == spec.keypoint_locals.end())
      throw std::runtime_error("target references pruned keypoint " +
                               std::to_string(label));
    out[label] = geom::transform_point(pose_it->second, it->second);
  }
  return out;
}

double mean_target_distance(const SimState& state, const RewardSpec& spec) {
  auto positions = target_keypoint_positions(state, spec);
  double sum = 0.0;
  for (const auto& [label, pos] : positions) sum += (pos - spec.targets.at(label)).norm();
  return positions.empty() ? 0.0 : sum / static_cast<double>(positions.size());
}

std::pair<RewardBreakdown, int> compute_reward(const SimState& prev,
                                               const SimState& cur,
                                               const RewardSpec& spec,
                                               int hold_counter) {
  if (spec.targets.empty()) throw std::runtime_error("reward spec has no targets");

  auto prev_kp = target_keypoint_positions(prev, spec);
  auto cur_kp = target_keypoint_positions(cur, spec);
  const double n = static_cast<double>(spec.targets.size());

  RewardBreakdown b;

  const Vec3 object_center = cur.object_poses.at(spec.interaction_object).position;
  b.r_dist = -(cur.gripper.position - object_center).norm();

  double dir_sum = 0.0;
  double align_sum = 0.0;
  for (const auto& [label, target] : spec.targets) {
    Vec3 to_target = target - prev_kp.at(label);
    Vec3 moved = cur_kp.at(label) - prev_kp.at(label);
    double dist = to_target.norm();
    if (dist > 1e-12) dir_sum += std::max(0.0, to_target.dot(moved) / dist);
    align_sum += (cur_kp.at(label) - target).norm();
  }
  b.r_dir = dir_sum / n / spec.max_translation_step;
  b.r_align = -align_sum / n;
  b.mean_target_distance = align_sum / n;

  int hold = hold_counter;
  if (hold >= spec.hold_steps) {
    // already latched; the bonus fired on the transition
    b.success_latched = true;
  } else {
    hold = b.mean_target_distance < spec.success_threshold ? hold + 1 : 0;
    if (hold == spec.hold_steps) {
      b.r_bonus = 1.0;
      b.success_latched = true;
    }
  }

  double moved = (cur.gripper.position - prev.gripper.position).norm();
  b.r_penalty = (moved > spec.move_threshold ? 1.0 : 0.0) +
                (cur.violations.dropped ? 1.0 : 0.0) +
                (cur.violations.contact_impulse_sum > spec.force_threshold ? 1.0 : 0.0);

  const RewardWeights& w = spec.weights;
  b.total = w.alpha_dist * b.r_dist + w.alpha_dir * b.r_dir + w.alpha_align * b.r_align +
            w.alpha_bonus * b.r_bonus - w.alpha_penalty * b.r_penalty;
  return {b, hold};
}

bool check_success(const std::vector<SimState>& history, const RewardSpec& spec) {
  if (history.empty()) return false;
  return mean_target_distance(history.back(), spec) <= spec.success_threshold;
}

}  // namespace iker::reward
