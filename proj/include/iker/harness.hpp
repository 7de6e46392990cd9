#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iker/config.hpp"

// The benchmark suite: four tabletop scenarios with ten start/end
// configurations each, committed to the repository as fixtures (scene +
// instruction + one program per planner condition), plus the multi-step
// chaining and disturbance-recovery scenarios. run_benchmark trains one
// policy per configuration and evaluates it in the selected world.

namespace iker::bench {

enum class TaskId { place, push_pair, push_edge, reorient };
enum class Condition { annotated, automatic, pose_baseline };
enum class World { train, proxy };

std::string task_name(TaskId task);
std::string condition_name(Condition condition);
std::string world_name(World world);
std::optional<TaskId> task_from_name(const std::string& name);
std::optional<Condition> condition_from_name(const std::string& name);
std::optional<World> world_from_name(const std::string& name);

inline constexpr int kConfigsPerTask = 10;
inline constexpr int kEnvsPerConfig = 128;  // simulation trials per config

struct TaskConfigFixture {
  scene::SceneModel scene;  // authored scene, keypoints not yet generated
  std::string instruction;
  std::string annotated_program;
  std::string auto_keypoint_program;  // stands in for a recorded planner output
  std::string auto_pose_program;
};

struct ScenarioFixture {
  scene::SceneModel scene;
  std::string instruction;
  std::vector<std::string> step_programs;
};

// Deterministic authored configurations; the fixture generator serializes
// these into fixtures/ and the benchmark loads them back from disk.
TaskConfigFixture make_task_config(TaskId task, int index);
ScenarioFixture make_chaining_config(int index);
ScenarioFixture make_disturbance_config();

void write_task_fixture(const TaskConfigFixture& fixture, const std::string& dir);
void write_scenario_fixture(const ScenarioFixture& fixture, const std::string& dir);
TaskConfigFixture load_task_fixture(const std::string& dir);
ScenarioFixture load_scenario_fixture(const std::string& dir);

std::string task_fixture_dir(const std::string& fixtures_root, TaskId task, int index);
std::string chaining_fixture_dir(const std::string& fixtures_root, int index);
std::string disturbance_fixture_dir(const std::string& fixtures_root);

struct TrialRow {
  std::string task;
  std::string condition;
  std::string world;
  int config_id = 0;
  int env_id = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double final_mean_dist_m = 0.0;
  int steps = 0;
};

struct GroupSummary {
  std::string task;
  std::string condition;
  std::string world;
  std::string status;  // "run" or "skipped: <reason>"
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct BenchmarkReport {
  std::vector<TrialRow> rows;
  std::vector<GroupSummary> groups;
  // wall-clock training time per (task, config) cell, for the runtime budget
  std::vector<double> train_seconds;
};

struct BenchmarkOptions {
  std::string fixtures_root = "fixtures";
  std::vector<TaskId> tasks;
  Condition condition = Condition::annotated;
  World world = World::train;
  std::uint64_t seed = 7;
  bool dr_enabled = true;
  int proxy_eval_seeds = 1;  // proxy trials per configuration
};

// Trains per configuration, evaluates per protocol (128 randomized
// environments in the train world, one deployment-proxy episode per proxy
// seed), and returns the report. Missing fixtures mark the group skipped.
BenchmarkReport run_benchmark(const BenchmarkOptions& options, const Config& config);

// trials.csv, summary.json, plot_data.tsv
void emit_report(const BenchmarkReport& report, const std::string& out_dir);

// Recount helper used by tests: success rate per group recomputed from rows.
double recount_success_rate(const BenchmarkReport& report, const std::string& task,
                            const std::string& condition, const std::string& world);

}  // namespace iker::bench
