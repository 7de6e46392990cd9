#include "iker/loop.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace iker::loop {

using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1) + 0xbf58476d1ce4e5b9ull * (c + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x ^ (x >> 31);
}

json pose_json(const geom::Pose& p) {
  return {{"position", {p.position.x, p.position.y, p.position.z}},
          {"orientation",
           {p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z}}};
}

json state_json(const sim::SimState& s, double mean_dist) {
  json objects = json::object();
  for (const auto& [id, pose] : s.object_poses) objects[id] = pose_json(pose);
  return {{"step", s.step_count},
          {"gripper", pose_json(s.gripper)},
          {"grasped", s.grasped_object ? json(*s.grasped_object) : json(nullptr)},
          {"objects", objects},
          {"mean_target_distance", mean_dist},
          {"contact_impulse_sum", s.violations.contact_impulse_sum},
          {"dropped", s.violations.dropped}};
}

scene::SceneModel scene_at(const scene::SceneModel& base,
                           const std::map<std::string, geom::Pose>& poses,
                           const LoopConfig& config) {
  scene::SceneModel scn = base;
  for (auto& obj : scn.objects) {
    auto it = poses.find(obj.id);
    if (it != poses.end()) obj.initial_pose = it->second;
  }
  scene::generate_keypoints(scn, config.static_keypoint_spacing);
  return scene::prune_and_label(scn, scn.initial_poses(), config.min_separation);
}

}  // namespace

reward::RewardSpec build_reward_spec(const dsl::KeypointProgram& program,
                                     const scene::SceneModel& pruned,
                                     const std::map<std::string, geom::Pose>& poses,
                                     const LoopConfig& config) {
  if (!program.directive) throw std::runtime_error("program has no directive");
  reward::RewardSpec spec;
  spec.interaction_object = program.directive->object_id;
  spec.directive = program.directive->kind;
  spec.success_threshold = config.success_threshold;
  spec.hold_steps = config.hold_steps;
  spec.weights = config.reward_weights;
  spec.move_threshold = config.move_threshold;
  spec.force_threshold = config.force_threshold;
  spec.max_translation_step = config.sim.max_translation_step;

  for (const auto& kp : pruned.keypoints)
    if (!kp.on_static && kp.object_id == spec.interaction_object)
      spec.keypoint_locals[kp.label] = kp.local;

  if (program.is_pose_program()) {
    spec.targets = plan::pose_program_to_targets(program, pruned);
  } else {
    auto result = dsl::interpret(program, pruned.keypoint_positions(poses));
    spec.targets = result.targets;
  }
  if (spec.targets.empty()) throw std::runtime_error("program assigns no targets");
  for (const auto& [label, t] : spec.targets) {
    (void)t;
    if (!spec.keypoint_locals.count(label))
      throw std::runtime_error("target references pruned keypoint " +
                               std::to_string(label));
  }
  return spec;
}

DeploymentOutcome deploy_policy(const rl::Policy& policy, const scene::SceneModel& pruned,
                                const reward::RewardSpec& spec, const LoopConfig& config,
                                const std::vector<Disturbance>& disturbances,
                                std::uint64_t seed, const std::string& log_path,
                                std::map<std::string, geom::Pose>* final_poses) {
  sim::DomainRandomizationConfig world_dr = config.dr;
  sim::ObservationNoiseModel obs_noise;
  if (config.deployment_mode == WorldMode::deployment_proxy) {
    world_dr = sim::deployment_proxy_of(config.dr);
    obs_noise.enabled = true;
  }
  rl::TaskEnv env(pruned, spec, world_dr, config.sim, config.episode_horizon, obs_noise);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw std::runtime_error("cannot write trajectory log '" + log_path + "'");
    json meta;
    meta["interaction_object"] = spec.interaction_object;
    meta["success_threshold"] = spec.success_threshold;
    json targets = json::object();
    for (const auto& [label, t] : spec.targets)
      targets[std::to_string(label)] = {t.x, t.y, t.z};
    meta["targets"] = targets;
    json locals = json::object();
    for (const auto& [label, l] : spec.keypoint_locals)
      locals[std::to_string(label)] = {l.x, l.y, l.z};
    meta["keypoint_locals"] = locals;
    log << meta.dump() << "\n";
  }

  rl::PolicyRuntime runtime(policy);
  auto on_step = [&](rl::TaskEnv& e, int t) {
    for (const auto& d : disturbances) {
      if (d.trigger_step != t) continue;
      switch (d.effect) {
        case Disturbance::Effect::teleport_object:
          e.teleport_object(d.object_id, d.new_pose);
          break;
        case Disturbance::Effect::force_release_grasp:
          e.force_release_grasp();
          break;
        case Disturbance::Effect::swap_instruction:
          break;  // handled by the loop before planning
      }
    }
    if (log.is_open()) log << state_json(e.state(), e.mean_target_distance()).dump() << "\n";
  };

  auto outcome = rl::run_episode(env, runtime, seed, config.episode_horizon, on_step);
  env.end_episode_release();
  if (final_poses != nullptr) *final_poses = env.state().object_poses;

  DeploymentOutcome out;
  out.success = outcome.success;
  out.final_mean_distance = outcome.final_mean_distance;
  out.steps = outcome.steps;
  return out;
}

std::vector<IterationRecord> run_loop(const scene::SceneModel& base_scene,
                                      const std::string& instruction,
                                      plan::PlannerBackend& backend,
                                      const LoopConfig& config, std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::vector<IterationRecord> records;
  plan::ExecutionHistory history;
  std::map<std::string, geom::Pose> poses = base_scene.initial_poses();
  std::string current_instruction = instruction;

  for (int i = 1; i <= config.max_iterations; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    IterationRecord record;
    record.index = i;

    // instruction swaps scheduled for this iteration apply before planning
    for (const auto& d : config.disturbances)
      if (d.iteration == i && d.effect == Disturbance::Effect::swap_instruction)
        current_instruction = d.new_instruction;

    scene::SceneModel pruned = scene_at(base_scene, poses, config);
    auto obs = plan::make_observation(pruned, poses, current_instruction,
                                      config.include_color_tags);
    record.observation_summary = plan::serialize_observation(obs);

    std::string iter_dir;
    if (!config.run_dir.empty()) {
      iter_dir = config.run_dir + "/iteration_" + std::to_string(i);
      fs::create_directories(iter_dir);
      std::ofstream(iter_dir + "/prompt.txt")
          << plan::build_prompt(obs, history, config.prompt_mode);
    }

    try {
      record.program = plan::query_planner(backend, obs, history, pruned);
    } catch (const std::exception& err) {
      record.error = std::string("planner: ") + err.what();
      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      records.push_back(record);
      break;
    }
    if (!iter_dir.empty()) {
      std::ofstream(iter_dir + "/planner_output.txt")
          << (record.program.raw_text.empty() ? dsl::print_program(record.program)
                                              : record.program.raw_text);
      std::ofstream(iter_dir + "/program.txt") << dsl::print_program(record.program);
    }

    if (record.program.done) {
      record.done = true;
      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      records.push_back(record);
      break;
    }

    rl::TrainResult trained;
    try {
      auto spec = build_reward_spec(record.program, pruned, poses, config);
      trained = rl::train_task(pruned, spec, config.dr, config.sim, config.ppo,
                               mix(seed, i, 0x7131));
      record.train_updates = trained.updates_run;
      record.train_best_eval = trained.best_eval_success;
      record.train_seconds = trained.seconds;
      if (!iter_dir.empty()) rl::save_policy(trained.policy, iter_dir + "/policy.ckpt");

      std::vector<Disturbance> active;
      for (const auto& d : config.disturbances)
        if (d.iteration == i && d.effect != Disturbance::Effect::swap_instruction)
          active.push_back(d);

      record.deployment = deploy_policy(
          trained.policy, pruned, spec, config, active, mix(seed, i, 0xDE9),
          iter_dir.empty() ? std::string{} : iter_dir + "/trajectory.jsonl", &poses);
    } catch (const std::exception& err) {
      record.error = std::string("training: ") + err.what();
      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      records.push_back(record);
      break;
    }

    plan::HistoryEntry entry;
    entry.observation_summary = record.observation_summary;
    entry.program = record.program;
    entry.outcome.success = record.deployment.success;
    entry.outcome.final_mean_distance = record.deployment.final_mean_distance;
    history.push_back(entry);

    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!iter_dir.empty()) {
      json metrics;
      metrics["iteration"] = i;
      metrics["train_updates"] = record.train_updates;
      metrics["train_best_eval"] = record.train_best_eval;
      metrics["train_seconds"] = record.train_seconds;
      metrics["deploy_success"] = record.deployment.success;
      metrics["deploy_final_mean_distance"] = record.deployment.final_mean_distance;
      metrics["deploy_steps"] = record.deployment.steps;
      metrics["wall_seconds"] = record.wall_seconds;
      std::ofstream(iter_dir + "/metrics.json") << metrics.dump(2) << "\n";
    }
    records.push_back(record);
  }
  return records;
}

ReplayResult replay_trajectory(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open trajectory log '" + log_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory log");
  json meta = json::parse(line);
  std::string object = meta.at("interaction_object").get<std::string>();
  double threshold = meta.at("success_threshold").get<double>();

  std::map<int, geom::Vec3> targets;
  for (const auto& [label, t] : meta.at("targets").items())
    targets[std::stoi(label)] = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  std::map<int, geom::Vec3> locals;
  for (const auto& [label, l] : meta.at("keypoint_locals").items())
    locals[std::stoi(label)] = {l[0].get<double>(), l[1].get<double>(), l[2].get<double>()};

  ReplayResult result;
  json last;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    last = json::parse(line);
    result.steps += 1;
  }
  if (last.is_null()) throw std::runtime_error("trajectory log has no states");

  const auto& obj = last.at("objects").at(object);
  geom::Pose pose;
  const auto& p = obj.at("position");
  const auto& q = obj.at("orientation");
  pose.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
  pose.orientation = geom::Quat{q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                q[3].get<double>()};

  double sum = 0.0;
  for (const auto& [label, local] : locals) {
    auto it = targets.find(label);
    if (it == targets.end()) continue;
    sum += (geom::transform_point(pose, local) - it->second).norm();
  }
  result.final_mean_distance = targets.empty() ? 0.0 : sum / targets.size();
  result.success = result.final_mean_distance <= threshold;
  return result;
}

}  // namespace iker::loop
