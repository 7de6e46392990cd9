#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iker/planner.hpp"
#include "iker/rl.hpp"

// The execution loop: observe, plan, train, execute in the deployment
// world, record the outcome, and continue until the planner declares done.
// The deployment world's final object poses seed the next iteration, so
// multi-step tasks chain without resets.

namespace iker::loop {

enum class WorldMode { train_distribution, deployment_proxy };

struct Disturbance {
  enum class Effect { teleport_object, force_release_grasp, swap_instruction };
  int iteration = 1;  // 1-based loop iteration the effect applies to
  int trigger_step = 0;
  Effect effect = Effect::force_release_grasp;
  std::string object_id;        // teleport_object
  geom::Pose new_pose;          // teleport_object
  std::string new_instruction;  // swap_instruction
};

struct LoopConfig {
  int max_iterations = 8;
  plan::PromptMode prompt_mode = plan::PromptMode::multi_step;
  sim::DomainRandomizationConfig dr;
  sim::SimConfig sim;
  rl::PPOConfig ppo;
  reward::RewardWeights reward_weights;
  double success_threshold = 0.05;
  int hold_steps = 10;
  double move_threshold = 0.035;
  double force_threshold = 0.5;
  WorldMode deployment_mode = WorldMode::deployment_proxy;
  int episode_horizon = 300;  // deployment steps, 30 s at 10 Hz
  double static_keypoint_spacing = 0.1;
  double min_separation = 0.03;
  bool include_color_tags = true;
  std::vector<Disturbance> disturbances;
  std::string run_dir;  // when set, per-iteration artifacts are written here
};

struct DeploymentOutcome {
  bool success = false;
  double final_mean_distance = 0.0;
  int steps = 0;
};

struct IterationRecord {
  int index = 0;  // 1-based, strictly increasing
  std::string observation_summary;
  dsl::KeypointProgram program;
  bool done = false;
  int train_updates = 0;
  double train_best_eval = 0.0;
  double train_seconds = 0.0;
  DeploymentOutcome deployment;
  std::string error;  // planner or training failure, loop aborts after
  double wall_seconds = 0.0;
};

// Builds the reward spec for a validated, not-done program against the
// pruned scene (pose-baseline programs are converted to keypoint targets).
reward::RewardSpec build_reward_spec(const dsl::KeypointProgram& program,
                                     const scene::SceneModel& pruned,
                                     const std::map<std::string, geom::Pose>& poses,
                                     const LoopConfig& config);

// Deterministic-mean execution in the selected world with scheduled
// disturbances; writes a JSON-lines trajectory log when log_path is set.
DeploymentOutcome deploy_policy(const rl::Policy& policy, const scene::SceneModel& pruned,
                                const reward::RewardSpec& spec, const LoopConfig& config,
                                const std::vector<Disturbance>& disturbances,
                                std::uint64_t seed, const std::string& log_path,
                                std::map<std::string, geom::Pose>* final_poses);

std::vector<IterationRecord> run_loop(const scene::SceneModel& base_scene,
                                      const std::string& instruction,
                                      plan::PlannerBackend& backend,
                                      const LoopConfig& config, std::uint64_t seed);

// Trajectory log replay: recompute the outcome from the recorded states.
struct ReplayResult {
  int steps = 0;
  bool success = false;
  double final_mean_distance = 0.0;
};
ReplayResult replay_trajectory(const std::string& log_path);

}  // namespace iker::loop
