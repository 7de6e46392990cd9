#pragma once

#include <cstdint>
#include <string>

#include "iker/loop.hpp"

// One config file drives everything: simulator constants, randomization
// ranges, reward weights and thresholds, optimizer hyperparameters, planner
// transport, and loop settings. Defaults live in the structs; a JSON file
// overrides any subset, section by section.

namespace iker {

struct PlannerSettings {
  std::string backend = "scripted";  // scripted | replay | live | pose
  std::string completion_pointer = "/choices/0/message/content";
  std::string prompt_prefix_file;  // optional in-context examples
  bool include_color_tags = true;
  int max_attempts = 3;
};

struct RewardSettings {
  reward::RewardWeights weights;
  double success_threshold = 0.05;
  int hold_steps = 10;
  double move_threshold = 0.035;
  double force_threshold = 0.5;
};

struct LoopSettings {
  int max_iterations = 8;
  int episode_horizon = 300;
  double static_keypoint_spacing = 0.1;
  double min_separation = 0.03;
  std::string deployment_mode = "deployment_proxy";
};

struct Config {
  sim::SimConfig simulator;
  sim::DomainRandomizationConfig dr;
  RewardSettings reward;
  rl::PPOConfig ppo;
  PlannerSettings planner;
  LoopSettings loop;
};

Config default_config();
Config config_from_json_text(const std::string& text);
Config load_config(const std::string& path);  // missing path -> defaults
std::string config_to_json_text(const Config& config);

// FNV-1a over the canonical JSON dump; recorded in reports and checkpoints.
std::uint64_t config_hash(const Config& config);

// Assembles the loop module's settings from the one config.
loop::LoopConfig make_loop_config(const Config& config);

}  // namespace iker
