// Scratch driver: trains a single hand-built task and prints timing and
// success, to validate learnability before the benchmark harness exists.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "iker/reward.hpp"
#include "iker/rl.hpp"

using namespace iker;

namespace {

scene::SceneModel make_scene(bool with_rack) {
  scene::SceneModel scn;
  scn.workspace.min = {-0.4, -0.35, 0.0};
  scn.workspace.max = {0.4, 0.35, 0.4};
  scene::ObjectModel shoe;
  shoe.id = "red_shoe";
  shoe.half_extents = {0.055, 0.032, 0.028};
  shoe.initial_pose.position = {-0.15, -0.15, 0.028};
  shoe.initial_pose.orientation = geom::Quat::from_yaw(0.3);
  shoe.color_tag = "red";
  scn.objects = {shoe};
  scn.static_regions = {{"table", -0.4, -0.35, 0.4, 0.35, 0.0, false}};
  if (with_rack)
    scn.static_regions.push_back({"rack", -0.4, 0.2, 0.4, 0.35, 0.12, true});
  scene::generate_keypoints(scn, 0.1);
  return scn;
}

reward::RewardSpec make_spec(const scene::SceneModel& scn, const geom::Pose& goal,
                             Directive directive) {
  reward::RewardSpec spec;
  spec.interaction_object = "red_shoe";
  spec.directive = directive;
  for (const auto& kp : scn.keypoints) {
    if (kp.object_id != "red_shoe") continue;
    spec.keypoint_locals[kp.label] = kp.local;
    spec.targets[kp.label] = geom::transform_point(goal, kp.local);
  }
  return spec;
}

void run(const char* name, const scene::SceneModel& scn, const reward::RewardSpec& spec,
         bool dr_enabled, std::uint64_t seed) {
  sim::DomainRandomizationConfig dr;
  dr.enabled = dr_enabled;
  sim::SimConfig sim_config;
  rl::PPOConfig config;
  config.verbose = true;
  if (const char* mu = std::getenv("PROBE_MAX_UPDATES")) config.max_updates = std::atoi(mu);
  if (const char* lr = std::getenv("PROBE_LR")) config.learning_rate = std::atof(lr);
  if (const char* ec = std::getenv("PROBE_ENT")) config.entropy_coef = std::atof(ec);

  auto result = rl::train_task(scn, spec, dr, sim_config, config, seed);
  std::printf("%-12s dr=%d seed=%llu: updates=%3d best_eval=%.3f time=%.1fs\n", name,
              dr_enabled ? 1 : 0, static_cast<unsigned long long>(seed),
              result.updates_run, result.best_eval_success, result.seconds);

  // trajectory dump of one deterministic episode
  rl::PolicyRuntime runtime(result.policy);
  rl::TaskEnv env(scn, spec, dr, sim_config, config.train_horizon);
  auto outcome = rl::run_episode(env, runtime, 12345, config.train_horizon,
                                 [&](rl::TaskEnv& e, int t) {
    if (t % 15 != 0) return;
    const auto& s = e.state();
    const auto& obj = s.object_poses.at(spec.interaction_object);
    std::printf("  t=%3d grip=(%.3f,%.3f,%.3f) obj=(%.3f,%.3f,%.3f) yaw=%.2f dist=%.3f imp=%.2f\n",
                t, s.gripper.position.x, s.gripper.position.y, s.gripper.position.z,
                obj.position.x, obj.position.y, obj.position.z,
                obj.orientation.yaw(), e.mean_target_distance(),
                s.violations.contact_impulse_sum);
  });
  std::printf("  episode: success=%d final_dist=%.3f steps=%d\n", outcome.success,
              outcome.final_mean_distance, outcome.steps);
}

}  // namespace

namespace {

// mechanical sanity check: a hand-scripted approach-then-push controller
void scripted_push() {
  auto scn = make_scene(false);
  geom::Pose goal;
  goal.position = {0.15, 0.1, 0.028};
  goal.orientation = geom::Quat::from_yaw(0.3);
  auto spec = make_spec(scn, goal, Directive::push);

  sim::DomainRandomizationConfig dr;
  dr.enabled = false;
  sim::SimConfig config;
  auto [state, params] = sim::reset(scn, dr, config, 0);

  auto object_pos = [&](const sim::SimState& s) {
    return s.object_poses.at("red_shoe").position;
  };
  int hold = 0;
  for (int t = 0; t < 300; ++t) {
    geom::Vec3 obj = object_pos(state);
    geom::Vec3 to_goal = goal.position - obj;
    to_goal.z = 0;
    double dist = to_goal.norm();
    geom::Vec3 dir = dist > 1e-9 ? to_goal * (1.0 / dist) : geom::Vec3{};
    // stand behind the object relative to the goal, at its height
    geom::Vec3 stand = obj - dir * 0.09;
    stand.z = obj.z;
    geom::Vec3 target_pt = dist > 0.01 ? stand + dir * 0.02 : stand;
    // phase: go to stand point first, then advance into the object
    geom::Vec3 delta = (state.gripper.position - stand).norm() > 0.03
                           ? stand - state.gripper.position
                           : target_pt + dir * 0.05 - state.gripper.position;
    geom::ActionDelta a;
    a.dp = {geom::clamp(delta.x, -0.02, 0.02), geom::clamp(delta.y, -0.02, 0.02),
            geom::clamp(delta.z, -0.02, 0.02)};
    state = sim::step(state, a, scn, params, config);
    auto [b, h] = reward::compute_reward(state, state, spec, hold);
    hold = h;
    if (t % 20 == 0)
      std::printf("t=%3d grip=(%.3f,%.3f,%.3f) obj=(%.3f,%.3f,%.3f) dist=%.3f imp=%.3f\n",
                  t, state.gripper.position.x, state.gripper.position.y,
                  state.gripper.position.z, obj.x, obj.y, obj.z, dist,
                  state.violations.contact_impulse_sum);
    if (dist < 0.02) {
      std::printf("reached goal at t=%d, impulse=%.3f\n", t,
                  state.violations.contact_impulse_sum);
      return;
    }
  }
  std::printf("FAILED to reach goal; final dist above\n");
}

}  // namespace

int main(int argc, char** argv) {
  std::string which = argc > 1 ? argv[1] : "place";
  std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;

  if (which == "script-push") {
    scripted_push();
    return 0;
  }
  if (which == "approach") {
    // distance-term-only diagnostic: can the policy learn pure approach?
    auto scn = make_scene(false);
    geom::Pose goal;
    goal.position = {0.15, 0.1, 0.028};
    goal.orientation = geom::Quat::from_yaw(0.3);
    auto spec = make_spec(scn, goal, Directive::push);
    spec.weights.alpha_dist = 1.0;
    spec.weights.alpha_dir = 0.0;
    spec.weights.alpha_align = 0.0;
    spec.weights.alpha_bonus = 0.0;
    spec.weights.alpha_penalty = 0.0;
    run("approach", scn, spec, true, seed);
    return 0;
  }
  if (which == "place") {
    auto scn = make_scene(true);
    geom::Pose goal;
    goal.position = {0.1, 0.27, 0.12 + 0.028};
    goal.orientation = geom::Quat::from_yaw(1.2);
    run("place", scn, make_spec(scn, goal, Directive::grasp), true, seed);
  } else if (which == "push") {
    auto scn = make_scene(false);
    geom::Pose goal;
    goal.position = {0.15, 0.1, 0.028};
    goal.orientation = geom::Quat::from_yaw(0.3);
    auto spec = make_spec(scn, goal, Directive::push);
    if (const char* ad = std::getenv("PROBE_ALPHA_DIST"))
      spec.weights.alpha_dist = std::atof(ad);
    run("push", scn, spec, true, seed);
  } else if (which == "reorient") {
    auto scn = make_scene(true);
    scn.objects[0].initial_pose.position = {0.0, 0.27, 0.12 + 0.028};
    scn.objects[0].initial_pose.orientation = geom::Quat::from_yaw(0.2);
    scene::generate_keypoints(scn, 0.1);
    geom::Pose goal;
    goal.position = {0.0, 0.27, 0.12 + 0.028};
    goal.orientation = geom::Quat::from_yaw(0.2 + 1.5708);
    run("reorient", scn, make_spec(scn, goal, Directive::push), true, seed);
  }
  return 0;
}
