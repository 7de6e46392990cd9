#include "iker/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace iker {

using nlohmann::json;

namespace {

json range_json(const sim::Range& r) { return json::array({r.lo, r.hi}); }

void read_range(const json& j, const char* key, sim::Range& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  r.lo = v.at(0).get<double>();
  r.hi = v.at(1).get<double>();
  if (r.lo > r.hi) throw std::runtime_error(std::string("range ") + key + ": lo > hi");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec3(const json& j, const char* key, geom::Vec3& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  out = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
}

}  // namespace

Config default_config() { return Config{}; }

std::string config_to_json_text(const Config& c) {
  json j;
  j["simulator"] = {
      {"max_translation_step", c.simulator.max_translation_step},
      {"max_rotation_step", c.simulator.max_rotation_step},
      {"gripper_radius", c.simulator.gripper_radius},
      {"gripper_home",
       {c.simulator.gripper_home.x, c.simulator.gripper_home.y, c.simulator.gripper_home.z}},
      {"gripper_home_yaw", c.simulator.gripper_home_yaw},
      {"penetration_tolerance", c.simulator.penetration_tolerance},
      {"rotation_gain", c.simulator.rotation_gain},
      {"max_push_rotation", c.simulator.max_push_rotation},
      {"slip_min", c.simulator.slip_min},
      {"friction_reference", c.simulator.friction_reference},
      {"compliance_slip_jitter", c.simulator.compliance_slip_jitter},
      {"force_accumulator_scale", c.simulator.force_accumulator_scale},
      {"force_mass_reference", c.simulator.force_mass_reference},
      {"restitution_force_gain", c.simulator.restitution_force_gain},
      {"compliance_force_gain", c.simulator.compliance_force_gain},
      {"max_placement_attempts", c.simulator.max_placement_attempts}};
  j["dr"] = {{"enabled", c.dr.enabled},
             {"scale", range_json(c.dr.scale)},
             {"mass", range_json(c.dr.mass)},
             {"friction", range_json(c.dr.friction)},
             {"restitution", range_json(c.dr.restitution)},
             {"compliance", range_json(c.dr.compliance)},
             {"com_offset", range_json(c.dr.com_offset)},
             {"initial_position", range_json(c.dr.initial_position)},
             {"initial_orientation", range_json(c.dr.initial_orientation)},
             {"grasp_position", range_json(c.dr.grasp_position)},
             {"grasp_orientation", range_json(c.dr.grasp_orientation)},
             {"gripper_home_xy", range_json(c.dr.gripper_home_xy)},
             {"gripper_home_z", range_json(c.dr.gripper_home_z)}};
  j["reward"] = {{"alpha_dist", c.reward.weights.alpha_dist},
                 {"alpha_dir", c.reward.weights.alpha_dir},
                 {"alpha_align", c.reward.weights.alpha_align},
                 {"alpha_bonus", c.reward.weights.alpha_bonus},
                 {"alpha_penalty", c.reward.weights.alpha_penalty},
                 {"success_threshold", c.reward.success_threshold},
                 {"hold_steps", c.reward.hold_steps},
                 {"move_threshold", c.reward.move_threshold},
                 {"force_threshold", c.reward.force_threshold}};
  j["ppo"] = {{"num_envs", c.ppo.num_envs},
              {"rollout_length", c.ppo.rollout_length},
              {"epochs_per_update", c.ppo.epochs_per_update},
              {"minibatch_size", c.ppo.minibatch_size},
              {"clip_epsilon", c.ppo.clip_epsilon},
              {"gamma", c.ppo.gamma},
              {"gae_lambda", c.ppo.gae_lambda},
              {"learning_rate", c.ppo.learning_rate},
              {"linear_lr_decay", c.ppo.linear_lr_decay},
              {"value_coef", c.ppo.value_coef},
              {"entropy_coef", c.ppo.entropy_coef},
              {"max_grad_norm", c.ppo.max_grad_norm},
              {"max_updates", c.ppo.max_updates},
              {"target_success_early_stop", c.ppo.target_success_early_stop},
              {"eval_interval", c.ppo.eval_interval},
              {"train_horizon", c.ppo.train_horizon},
              {"hidden", c.ppo.hidden},
              {"contact_start_probability", c.ppo.contact_start_probability}};
  j["planner"] = {{"backend", c.planner.backend},
                  {"completion_pointer", c.planner.completion_pointer},
                  {"prompt_prefix_file", c.planner.prompt_prefix_file},
                  {"include_color_tags", c.planner.include_color_tags},
                  {"max_attempts", c.planner.max_attempts}};
  j["loop"] = {{"max_iterations", c.loop.max_iterations},
               {"episode_horizon", c.loop.episode_horizon},
               {"static_keypoint_spacing", c.loop.static_keypoint_spacing},
               {"min_separation", c.loop.min_separation},
               {"deployment_mode", c.loop.deployment_mode}};
  return j.dump(2) + "\n";
}

Config config_from_json_text(const std::string& text) {
  Config c;
  json j = json::parse(text);
  if (j.contains("simulator")) {
    const auto& s = j.at("simulator");
    read(s, "max_translation_step", c.simulator.max_translation_step);
    read(s, "max_rotation_step", c.simulator.max_rotation_step);
    read(s, "gripper_radius", c.simulator.gripper_radius);
    read_vec3(s, "gripper_home", c.simulator.gripper_home);
    read(s, "gripper_home_yaw", c.simulator.gripper_home_yaw);
    read(s, "penetration_tolerance", c.simulator.penetration_tolerance);
    read(s, "rotation_gain", c.simulator.rotation_gain);
    read(s, "max_push_rotation", c.simulator.max_push_rotation);
    read(s, "slip_min", c.simulator.slip_min);
    read(s, "friction_reference", c.simulator.friction_reference);
    read(s, "compliance_slip_jitter", c.simulator.compliance_slip_jitter);
    read(s, "force_accumulator_scale", c.simulator.force_accumulator_scale);
    read(s, "force_mass_reference", c.simulator.force_mass_reference);
    read(s, "restitution_force_gain", c.simulator.restitution_force_gain);
    read(s, "compliance_force_gain", c.simulator.compliance_force_gain);
    read(s, "max_placement_attempts", c.simulator.max_placement_attempts);
  }
  if (j.contains("dr")) {
    const auto& d = j.at("dr");
    read(d, "enabled", c.dr.enabled);
    read_range(d, "scale", c.dr.scale);
    read_range(d, "mass", c.dr.mass);
    read_range(d, "friction", c.dr.friction);
    read_range(d, "restitution", c.dr.restitution);
    read_range(d, "compliance", c.dr.compliance);
    read_range(d, "com_offset", c.dr.com_offset);
    read_range(d, "initial_position", c.dr.initial_position);
    read_range(d, "initial_orientation", c.dr.initial_orientation);
    read_range(d, "grasp_position", c.dr.grasp_position);
    read_range(d, "grasp_orientation", c.dr.grasp_orientation);
    read_range(d, "gripper_home_xy", c.dr.gripper_home_xy);
    read_range(d, "gripper_home_z", c.dr.gripper_home_z);
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    read(r, "alpha_dist", c.reward.weights.alpha_dist);
    read(r, "alpha_dir", c.reward.weights.alpha_dir);
    read(r, "alpha_align", c.reward.weights.alpha_align);
    read(r, "alpha_bonus", c.reward.weights.alpha_bonus);
    read(r, "alpha_penalty", c.reward.weights.alpha_penalty);
    read(r, "success_threshold", c.reward.success_threshold);
    read(r, "hold_steps", c.reward.hold_steps);
    read(r, "move_threshold", c.reward.move_threshold);
    read(r, "force_threshold", c.reward.force_threshold);
  }
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    read(p, "num_envs", c.ppo.num_envs);
    read(p, "rollout_length", c.ppo.rollout_length);
    read(p, "epochs_per_update", c.ppo.epochs_per_update);
    read(p, "minibatch_size", c.ppo.minibatch_size);
    read(p, "clip_epsilon", c.ppo.clip_epsilon);
    read(p, "gamma", c.ppo.gamma);
    read(p, "gae_lambda", c.ppo.gae_lambda);
    read(p, "learning_rate", c.ppo.learning_rate);
    read(p, "linear_lr_decay", c.ppo.linear_lr_decay);
    read(p, "value_coef", c.ppo.value_coef);
    read(p, "entropy_coef", c.ppo.entropy_coef);
    read(p, "max_grad_norm", c.ppo.max_grad_norm);
    read(p, "max_updates", c.ppo.max_updates);
    read(p, "target_success_early_stop", c.ppo.target_success_early_stop);
    read(p, "eval_interval", c.ppo.eval_interval);
    read(p, "train_horizon", c.ppo.train_horizon);
    read(p, "hidden", c.ppo.hidden);
    read(p, "contact_start_probability", c.ppo.contact_start_probability);
  }
  if (j.contains("planner")) {
    const auto& p = j.at("planner");
    read(p, "backend", c.planner.backend);
    read(p, "completion_pointer", c.planner.completion_pointer);
    read(p, "prompt_prefix_file", c.planner.prompt_prefix_file);
    read(p, "include_color_tags", c.planner.include_color_tags);
    read(p, "max_attempts", c.planner.max_attempts);
  }
  if (j.contains("loop")) {
    const auto& l = j.at("loop");
    read(l, "max_iterations", c.loop.max_iterations);
    read(l, "episode_horizon", c.loop.episode_horizon);
    read(l, "static_keypoint_spacing", c.loop.static_keypoint_spacing);
    read(l, "min_separation", c.loop.min_separation);
    read(l, "deployment_mode", c.loop.deployment_mode);
    if (c.loop.deployment_mode != "deployment_proxy" &&
        c.loop.deployment_mode != "train_distribution")
      throw std::runtime_error("unknown deployment_mode '" + c.loop.deployment_mode + "'");
  }
  return c;
}

Config load_config(const std::string& path) {
  if (path.empty()) return default_config();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::uint64_t config_hash(const Config& config) {
  std::string text = config_to_json_text(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

loop::LoopConfig make_loop_config(const Config& config) {
  loop::LoopConfig lc;
  lc.max_iterations = config.loop.max_iterations;
  lc.dr = config.dr;
  lc.sim = config.simulator;
  lc.ppo = config.ppo;
  lc.reward_weights = config.reward.weights;
  lc.success_threshold = config.reward.success_threshold;
  lc.hold_steps = config.reward.hold_steps;
  lc.move_threshold = config.reward.move_threshold;
  lc.force_threshold = config.reward.force_threshold;
  lc.deployment_mode = config.loop.deployment_mode == "train_distribution"
                           ? loop::WorldMode::train_distribution
                           : loop::WorldMode::deployment_proxy;
  lc.episode_horizon = config.loop.episode_horizon;
  lc.static_keypoint_spacing = config.loop.static_keypoint_spacing;
  lc.min_separation = config.loop.min_separation;
  lc.include_color_tags = config.planner.include_color_tags;
  return lc;
}

}  // namespace iker
