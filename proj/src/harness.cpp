#include "iker/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace iker::bench {

namespace fs = std::filesystem;
using geom::Pose;
using geom::Quat;
using geom::Vec3;
using nlohmann::json;

std::string task_name(TaskId task) {
  switch (task) {
    case TaskId::place: return "place";
    case TaskId::push_pair: return "push_pair";
    case TaskId::push_edge: return "push_edge";
    case TaskId::reorient: return "reorient";
  }
  return "?";
}

std::string condition_name(Condition condition) {
  switch (condition) {
    case Condition::annotated: return "annotated";
    case Condition::automatic: return "automatic";
    case Condition::pose_baseline: return "pose-baseline";
  }
  return "?";
}

std::string world_name(World world) {
  return world == World::train ? "train" : "proxy";
}

std::optional<TaskId> task_from_name(const std::string& name) {
  for (TaskId t : {TaskId::place, TaskId::push_pair, TaskId::push_edge, TaskId::reorient})
    if (task_name(t) == name) return t;
  return std::nullopt;
}

std::optional<Condition> condition_from_name(const std::string& name) {
  for (Condition c : {Condition::annotated, Condition::automatic, Condition::pose_baseline})
    if (condition_name(c) == name) return c;
  return std::nullopt;
}

std::optional<World> world_from_name(const std::string& name) {
  if (name == "train") return World::train;
  if (name == "proxy") return World::proxy;
  return std::nullopt;
}

namespace {

constexpr double kRackHeight = 0.12;

scene::SceneModel base_scene(bool rack_keypoints) {
  scene::SceneModel scn;
  scn.workspace.min = {-0.4, -0.35, 0.0};
  scn.workspace.max = {0.4, 0.35, 0.4};
  scn.static_regions = {{"table", -0.4, -0.35, 0.4, 0.35, 0.0, false},
                        {"rack", -0.4, 0.2, 0.4, 0.35, kRackHeight, rack_keypoints}};
  return scn;
}

scene::ObjectModel make_box(const std::string& id, const std::string& color,
                            const Vec3& half, double x, double y, double support,
                            double yaw) {
  scene::ObjectModel obj;
  obj.id = id;
  obj.color_tag = color;
  obj.half_extents = half;
  obj.initial_pose.position = {x, y, support + half.z};
  obj.initial_pose.orientation = Quat::from_yaw(yaw);
  return obj;
}

std::string num4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// goal keypoint targets as vec literals, one per object keypoint
std::string keypoint_targets_text(const scene::SceneModel& scn, const std::string& obj_id,
                                  const Pose& goal, const Vec3& error, int drop_count) {
  scene::SceneModel with_kps = scn;
  scene::generate_keypoints(with_kps, 0.1);
  std::ostringstream out;
  int emitted = 0;
  std::vector<const scene::Keypoint*> own;
  for (const auto& kp : with_kps.keypoints)
    if (!kp.on_static && kp.object_id == obj_id) own.push_back(&kp);
  int keep = static_cast<int>(own.size()) - drop_count;
  for (const auto* kp : own) {
    if (emitted >= keep) break;
    Vec3 target = geom::transform_point(goal, kp->local) + error;
    out << "target[" << kp->label << "] = vec(" << num4(target.x) << ", "
        << num4(target.y) << ", " << num4(target.z) << ")\n";
    ++emitted;
  }
  return out.str();
}

std::string directive_line(Directive d, const std::string& obj) {
  return std::string(directive_name(d)) + "(" + obj + ")\n";
}

struct GoalSpec {
  std::string object_id;
  Directive directive;
  Pose goal;
  double goal_yaw = 0.0;
  double start_yaw = 0.0;
};

std::string annotated_text(const scene::SceneModel& scn, const GoalSpec& g) {
  return directive_line(g.directive, g.object_id) +
         keypoint_targets_text(scn, g.object_id, g.goal, {}, 0);
}

// stand-in for a recorded planner output: small position offsets, and every
// fourth configuration uses only three of the four keypoints
std::string auto_keypoint_text(const scene::SceneModel& scn, const GoalSpec& g, int k) {
  Vec3 err{0.012 * std::cos(2.1 * k + 0.4), 0.012 * std::sin(1.3 * k + 0.9), 0.0};
  int drop = k % 4 == 3 ? 1 : 0;
  return directive_line(g.directive, g.object_id) +
         keypoint_targets_text(scn, g.object_id, g.goal, err, drop);
}

// pose-format stand-in: near-correct translations, but relative rotations
// come out sign-flipped (the failure mode pose goals are prone to)
std::string auto_pose_text(const GoalSpec& g, int k) {
  Vec3 err{0.015 * std::cos(1.7 * k), 0.015 * std::sin(2.3 * k), 0.0};
  double relative = geom::wrap_angle(g.goal_yaw - g.start_yaw);
  double yaw = std::abs(relative) > 0.35 ? g.start_yaw - 0.9 * relative
                                         : g.goal_yaw + 0.08 * std::sin(double(k));
  std::ostringstream out;
  out << directive_line(g.directive, g.object_id);
  out << "pose_target[" << g.object_id << "] = pose(" << num4(g.goal.position.x + err.x)
      << ", " << num4(g.goal.position.y + err.y) << ", " << num4(g.goal.position.z)
      << ", 0, 0, " << num4(yaw) << ")\n";
  return out.str();
}

}  // namespace

TaskConfigFixture make_task_config(TaskId task, int index) {
  if (index < 0 || index >= kConfigsPerTask)
    throw std::runtime_error("task config index out of range");
  const int k = index;
  TaskConfigFixture fixture;
  GoalSpec goal;

  switch (task) {
    case TaskId::place: {
      fixture.scene = base_scene(true);
      double yaw_s = -0.9 + 0.22 * k;
      fixture.scene.objects = {make_box("red_shoe", "red", {0.055, 0.032, 0.028},
                                        -0.28 + 0.055 * k, -0.26 + 0.02 * k, 0.0, yaw_s)};
      goal.object_id = "red_shoe";
      goal.directive = Directive::grasp;
      goal.start_yaw = yaw_s;
      goal.goal_yaw = k % 3 == 0 ? yaw_s : (k % 3 == 1 ? yaw_s + 1.1 : yaw_s - 1.3);
      goal.goal.position = {-0.30 + 0.065 * k, 0.27, kRackHeight + 0.028};
      goal.goal.orientation = Quat::from_yaw(goal.goal_yaw);
      std::ostringstream instr;
      instr << "Pick up the red shoe and place it on the rack with its center near ("
            << num4(goal.goal.position.x) << ", " << num4(goal.goal.position.y) << ")";
      if (k % 3 == 1) instr << ", rotated about a quarter turn counterclockwise";
      if (k % 3 == 2) instr << ", rotated roughly a quarter turn clockwise";
      instr << ".";
      fixture.instruction = instr.str();
      break;
    }
    case TaskId::push_pair: {
      fixture.scene = base_scene(true);
      double yaw_a = -0.8 + 0.2 * k;
      double yaw_b = -0.5 + 0.13 * k;
      double xb = 0.20 - 0.045 * k;
      double yb = -0.02 + 0.01 * k;
      fixture.scene.objects = {make_box("red_shoe", "red", {0.055, 0.032, 0.028},
                                        -0.26 + 0.05 * k, -0.26 + 0.018 * k, 0.0, yaw_a),
                               make_box("green_shoe", "green", {0.055, 0.032, 0.028},
                                        xb, yb, 0.0, yaw_b)};
      double side = k % 2 == 0 ? 1.0 : -1.0;
      Vec3 lateral = Quat::from_yaw(yaw_b).rotate({0.0, side * 0.114, 0.0});
      if (yb + lateral.y > 0.10) lateral = lateral * -1.0;  // keep the pair on the table
      goal.object_id = "red_shoe";
      goal.directive = Directive::push;
      goal.start_yaw = yaw_a;
      goal.goal_yaw = yaw_b;
      goal.goal.position = Vec3{xb, yb, 0.028} + Vec3{lateral.x, lateral.y, 0.0};
      goal.goal.orientation = Quat::from_yaw(yaw_b);
      fixture.instruction =
          "Push the red shoe right next to the green shoe so the two sit side by side "
          "as a matching pair.";
      break;
    }
    case TaskId::push_edge: {
      fixture.scene = base_scene(true);
      double yaw_s = -1.1 + 0.24 * k;
      double xs = -0.22 + 0.05 * k;
      fixture.scene.objects = {make_box("blue_book", "blue", {0.05, 0.065, 0.015}, xs,
                                        0.06 - 0.022 * k, 0.0, yaw_s)};
      goal.object_id = "blue_book";
      goal.directive = Directive::push;
      goal.start_yaw = yaw_s;
      goal.goal_yaw = yaw_s;
      goal.goal.position = {xs - 0.06 + 0.013 * k, -0.285, 0.015};
      goal.goal.orientation = Quat::from_yaw(yaw_s);
      fixture.instruction =
          "Slide the blue book into the band along the front edge of the table, "
          "keeping its current orientation.";
      break;
    }
    case TaskId::reorient: {
      fixture.scene = base_scene(true);
      double yaw_s = -0.3 + 0.07 * k;
      double turn = k % 2 == 0 ? 1.5707963267948966 : -1.5707963267948966;
      fixture.scene.objects = {make_box("blue_book", "blue", {0.06, 0.04, 0.015},
                                        -0.25 + 0.055 * k, 0.27, kRackHeight, yaw_s)};
      goal.object_id = "blue_book";
      goal.directive = Directive::push;
      goal.start_yaw = yaw_s;
      goal.goal_yaw = yaw_s + turn;
      goal.goal.position = {-0.25 + 0.055 * k, 0.27, kRackHeight + 0.015};
      goal.goal.orientation = Quat::from_yaw(goal.goal_yaw);
      fixture.instruction = std::string("Rotate the blue book a quarter turn ") +
                            (turn > 0 ? "counterclockwise" : "clockwise") +
                            " in place on the shelf.";
      break;
    }
  }

  fixture.annotated_program = annotated_text(fixture.scene, goal);
  fixture.auto_keypoint_program = auto_keypoint_text(fixture.scene, goal, k);
  fixture.auto_pose_program = auto_pose_text(goal, k);
  return fixture;
}

ScenarioFixture make_chaining_config(int index) {
  if (index < 0 || index >= kConfigsPerTask)
    throw std::runtime_error("chaining config index out of range");
  const int k = index;
  ScenarioFixture fixture;
  fixture.scene = base_scene(false);

  double xb = -0.06 + 0.018 * k;
  double dir = k % 2 == 0 ? 1.0 : -1.0;
  fixture.scene.objects = {
      make_box("shoe_box", "brown", {0.085, 0.05, 0.04}, xb, 0.27, kRackHeight, 0.0),
      make_box("red_shoe", "red", {0.055, 0.032, 0.028}, -0.27 + 0.04 * k,
               -0.22 + 0.012 * k, 0.0, 0.15 * k - 0.6),
      make_box("green_shoe", "green", {0.055, 0.032, 0.028}, 0.05 + 0.025 * k,
               -0.12 + 0.015 * k, 0.0, 0.4 - 0.1 * k)};
  fixture.instruction =
      "Make room on the rack by pushing the shoe box aside, then place the red shoe "
      "and the green shoe onto the cleared part of the rack.";

  Pose box_goal;
  box_goal.position = {xb + dir * 0.20, 0.27, kRackHeight + 0.04};
  box_goal.orientation = Quat::from_yaw(0.0);
  GoalSpec g1{"shoe_box", Directive::push, box_goal, 0.0, 0.0};

  Pose slot1;
  slot1.position = {xb, 0.27, kRackHeight + 0.028};
  slot1.orientation = Quat::from_yaw(0.0);
  GoalSpec g2{"red_shoe", Directive::grasp, slot1, 0.0, 0.15 * k - 0.6};

  Pose slot2;
  slot2.position = {xb - dir * 0.135, 0.27, kRackHeight + 0.028};
  slot2.orientation = Quat::from_yaw(0.0);
  GoalSpec g3{"green_shoe", Directive::grasp, slot2, 0.0, 0.4 - 0.1 * k};

  fixture.step_programs = {annotated_text(fixture.scene, g1),
                           annotated_text(fixture.scene, g2),
                           annotated_text(fixture.scene, g3)};
  return fixture;
}

ScenarioFixture make_disturbance_config() {
  ScenarioFixture fixture;
  fixture.scene = base_scene(false);
  fixture.scene.objects = {
      make_box("red_shoe", "red", {0.055, 0.032, 0.028}, -0.22, -0.18, 0.0, 0.2)};
  fixture.instruction = "Place the red shoe on the rack.";

  Pose goal;
  goal.position = {0.1, 0.27, kRackHeight + 0.028};
  goal.orientation = Quat::from_yaw(0.8);
  GoalSpec g{"red_shoe", Directive::grasp, goal, 0.8, 0.2};
  fixture.step_programs = {annotated_text(fixture.scene, g)};
  return fixture;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace

void write_task_fixture(const TaskConfigFixture& fixture, const std::string& dir) {
  fs::create_directories(dir);
  scene::save_scene(fixture.scene, dir + "/scene.json");
  write_file(dir + "/instruction.txt", fixture.instruction + "\n");
  write_file(dir + "/annotated.prog", fixture.annotated_program);
  write_file(dir + "/auto_keypoint.prog", fixture.auto_keypoint_program);
  write_file(dir + "/auto_pose.prog", fixture.auto_pose_program);
}

void write_scenario_fixture(const ScenarioFixture& fixture, const std::string& dir) {
  fs::create_directories(dir);
  scene::save_scene(fixture.scene, dir + "/scene.json");
  write_file(dir + "/instruction.txt", fixture.instruction + "\n");
  for (size_t i = 0; i < fixture.step_programs.size(); ++i)
    write_file(dir + "/step_" + std::to_string(i + 1) + ".prog", fixture.step_programs[i]);
}

TaskConfigFixture load_task_fixture(const std::string& dir) {
  TaskConfigFixture fixture;
  fixture.scene = scene::load_scene(dir + "/scene.json");
  fixture.instruction = read_file(dir + "/instruction.txt");
  fixture.annotated_program = read_file(dir + "/annotated.prog");
  fixture.auto_keypoint_program = read_file(dir + "/auto_keypoint.prog");
  fixture.auto_pose_program = read_file(dir + "/auto_pose.prog");
  return fixture;
}

ScenarioFixture load_scenario_fixture(const std::string& dir) {
  ScenarioFixture fixture;
  fixture.scene = scene::load_scene(dir + "/scene.json");
  fixture.instruction = read_file(dir + "/instruction.txt");
  for (int i = 1;; ++i) {
    std::string path = dir + "/step_" + std::to_string(i) + ".prog";
    if (!fs::exists(path)) break;
    fixture.step_programs.push_back(read_file(path));
  }
  if (fixture.step_programs.empty())
    throw std::runtime_error("scenario fixture has no step programs: " + dir);
  return fixture;
}

std::string task_fixture_dir(const std::string& root, TaskId task, int index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", index);
  return root + "/tasks/" + task_name(task) + "/config_" + buf;
}

std::string chaining_fixture_dir(const std::string& root, int index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", index);
  return root + "/chaining/config_" + buf;
}

std::string disturbance_fixture_dir(const std::string& root) {
  return root + "/disturbance";
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1) + 0xbf58476d1ce4e5b9ull * (c + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x ^ (x >> 31);
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkOptions& options, const Config& config) {
  BenchmarkReport report;
  loop::LoopConfig lc = make_loop_config(config);
  lc.dr.enabled = options.dr_enabled;
  std::uint64_t hash = config_hash(config);

  std::vector<TaskId> tasks = options.tasks;
  if (tasks.empty())
    tasks = {TaskId::place, TaskId::push_pair, TaskId::push_edge, TaskId::reorient};

  for (TaskId task : tasks) {
    GroupSummary group;
    group.task = task_name(task);
    group.condition = condition_name(options.condition);
    group.world = world_name(options.world);
    group.seed = options.seed;
    group.config_hash = hash;

    // all ten fixtures must be present, otherwise the group is skipped
    std::vector<TaskConfigFixture> fixtures;
    std::string missing;
    for (int k = 0; k < kConfigsPerTask; ++k) {
      std::string dir = task_fixture_dir(options.fixtures_root, task, k);
      if (!fs::exists(dir + "/scene.json")) {
        missing = dir;
        break;
      }
      fixtures.push_back(load_task_fixture(dir));
    }
    if (!missing.empty()) {
      group.status = "skipped: missing fixture " + missing;
      report.groups.push_back(group);
      continue;
    }

    double success_sum = 0.0;
    double dist_sum = 0.0;
    int trials = 0;
    for (int k = 0; k < kConfigsPerTask; ++k) {
      const auto& fixture = fixtures[k];
      scene::SceneModel scn = fixture.scene;
      scene::generate_keypoints(scn, lc.static_keypoint_spacing);
      scene::SceneModel pruned =
          scene::prune_and_label(scn, scn.initial_poses(), lc.min_separation);

      const std::string& text = options.condition == Condition::annotated
                                    ? fixture.annotated_program
                                    : options.condition == Condition::automatic
                                          ? fixture.auto_keypoint_program
                                          : fixture.auto_pose_program;
      auto program = dsl::parse_program(text, pruned);
      auto spec = loop::build_reward_spec(program, pruned, pruned.initial_poses(), lc);

      std::uint64_t train_seed = mix(options.seed, static_cast<std::uint64_t>(task), k);
      auto trained = rl::train_task(pruned, spec, lc.dr, lc.sim, lc.ppo, train_seed);
      report.train_seconds.push_back(trained.seconds);

      auto add_row = [&](int env_id, std::uint64_t seed, const rl::EpisodeOutcome& o) {
        TrialRow row;
        row.task = group.task;
        row.condition = group.condition;
        row.world = group.world;
        row.config_id = k;
        row.env_id = env_id;
        row.seed = seed;
        row.success = o.success;
        row.final_mean_dist_m = o.final_mean_distance;
        row.steps = o.steps;
        report.rows.push_back(row);
        success_sum += o.success ? 1.0 : 0.0;
        dist_sum += o.final_mean_distance;
        ++trials;
      };

      if (options.world == World::train) {
        std::vector<std::uint64_t> seeds(kEnvsPerConfig);
        for (int e = 0; e < kEnvsPerConfig; ++e)
          seeds[e] = mix(train_seed, 0xE0A1, e);
        auto outcomes = rl::evaluate_policy(pruned, spec, lc.dr, lc.sim, trained.policy,
                                            lc.episode_horizon, seeds);
        for (int e = 0; e < kEnvsPerConfig; ++e) add_row(e, seeds[e], outcomes[e]);
      } else {
        sim::DomainRandomizationConfig proxy = sim::deployment_proxy_of(config.dr);
        sim::ObservationNoiseModel noise;
        noise.enabled = true;
        std::vector<std::uint64_t> seeds(options.proxy_eval_seeds);
        for (int s = 0; s < options.proxy_eval_seeds; ++s)
          seeds[s] = mix(train_seed, 0xFE11, s);
        auto outcomes = rl::evaluate_policy(pruned, spec, proxy, lc.sim, trained.policy,
                                            lc.episode_horizon, seeds, noise);
        for (int s = 0; s < options.proxy_eval_seeds; ++s) add_row(s, seeds[s], outcomes[s]);
      }
    }

    group.status = "run";
    group.trials = trials;
    group.success_rate = trials > 0 ? success_sum / trials : 0.0;
    group.mean_final_distance = trials > 0 ? dist_sum / trials : 0.0;
    report.groups.push_back(group);
  }
  return report;
}

void emit_report(const BenchmarkReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);

  std::ofstream csv(out_dir + "/trials.csv");
  if (!csv) throw std::runtime_error("cannot write report to '" + out_dir + "'");
  csv << "task,condition,world,config_id,env_id,seed,success,final_mean_dist_m,steps\n";
  char buf[64];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.final_mean_dist_m);
    csv << row.task << ',' << row.condition << ',' << row.world << ',' << row.config_id
        << ',' << row.env_id << ',' << row.seed << ',' << (row.success ? 1 : 0) << ','
        << buf << ',' << row.steps << '\n';
  }
  csv.close();

  json summary;
  summary["groups"] = json::array();
  for (const auto& g : report.groups) {
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(g.config_hash));
    summary["groups"].push_back({{"task", g.task},
                                 {"condition", g.condition},
                                 {"world", g.world},
                                 {"status", g.status},
                                 {"success_rate", g.success_rate},
                                 {"mean_final_distance", g.mean_final_distance},
                                 {"trials", g.trials},
                                 {"seed", g.seed},
                                 {"config_hash", hash_hex}});
  }
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << "\n";

  std::ofstream tsv(out_dir + "/plot_data.tsv");
  tsv << "task\tcondition\tworld\tsuccess_rate\n";
  for (const auto& g : report.groups) {
    std::snprintf(buf, sizeof(buf), "%.4f", g.success_rate);
    tsv << g.task << '\t' << g.condition << '\t' << g.world << '\t' << buf << '\n';
  }
}

double recount_success_rate(const BenchmarkReport& report, const std::string& task,
                            const std::string& condition, const std::string& world) {
  int n = 0, s = 0;
  for (const auto& row : report.rows) {
    if (row.task != task || row.condition != condition || row.world != world) continue;
    ++n;
    s += row.success ? 1 : 0;
  }
  return n > 0 ? static_cast<double>(s) / n : 0.0;
}

}  // namespace iker::bench
