// Command-line front end: benchmark runs, single-config training and
// evaluation, the plan-train-execute loop, trajectory replay, and program
// validation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "iker/config.hpp"
#include "iker/harness.hpp"

using namespace iker;
namespace fs = std::filesystem;

namespace {

std::string default_fixtures_root() {
  if (const char* env = std::getenv("IKER_FIXTURES_DIR")) return env;
  return "fixtures";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

scene::SceneModel pruned_scene(const scene::SceneModel& base, const Config& config) {
  scene::SceneModel scn = base;
  scene::generate_keypoints(scn, config.loop.static_keypoint_spacing);
  return scene::prune_and_label(scn, scn.initial_poses(), config.loop.min_separation);
}

struct TrainTarget {
  scene::SceneModel pruned;
  reward::RewardSpec spec;
};

TrainTarget load_train_target(const std::string& fixtures, const std::string& task,
                              int config_id, const std::string& condition,
                              const Config& config) {
  auto task_id = bench::task_from_name(task);
  if (!task_id) throw std::runtime_error("unknown task '" + task + "'");
  auto cond = bench::condition_from_name(condition);
  if (!cond) throw std::runtime_error("unknown condition '" + condition + "'");
  auto fixture =
      bench::load_task_fixture(bench::task_fixture_dir(fixtures, *task_id, config_id));

  TrainTarget target;
  target.pruned = pruned_scene(fixture.scene, config);
  const std::string& text = *cond == bench::Condition::annotated
                                ? fixture.annotated_program
                                : *cond == bench::Condition::automatic
                                      ? fixture.auto_keypoint_program
                                      : fixture.auto_pose_program;
  auto program = dsl::parse_program(text, target.pruned);
  target.spec = loop::build_reward_spec(program, target.pruned,
                                        target.pruned.initial_poses(),
                                        make_loop_config(config));
  return target;
}

int run_bench(const std::string& fixtures, const std::string& task,
              const std::string& condition, const std::string& world,
              std::uint64_t seed, bool no_dr, int proxy_seeds, const std::string& out,
              const Config& config) {
  bench::BenchmarkOptions options;
  options.fixtures_root = fixtures;
  if (task != "all") {
    auto id = bench::task_from_name(task);
    if (!id) {
      std::fprintf(stderr, "unknown task '%s'\n", task.c_str());
      return 2;
    }
    options.tasks = {*id};
  }
  auto cond = bench::condition_from_name(condition);
  if (!cond) {
    std::fprintf(stderr, "unknown condition '%s'\n", condition.c_str());
    return 2;
  }
  options.condition = *cond;
  auto w = bench::world_from_name(world);
  if (!w) {
    std::fprintf(stderr, "unknown world '%s'\n", world.c_str());
    return 2;
  }
  options.world = *w;
  options.seed = seed;
  options.dr_enabled = !no_dr;
  options.proxy_eval_seeds = proxy_seeds;

  auto report = bench::run_benchmark(options, config);
  bench::emit_report(report, out);
  for (const auto& g : report.groups) {
    std::printf("%-10s %-13s %-6s %-28s success %.3f over %d trials\n", g.task.c_str(),
                g.condition.c_str(), g.world.c_str(), g.status.c_str(), g.success_rate,
                g.trials);
  }
  std::printf("report written to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale keypoint-reward manipulation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (defaults when omitted)");

  // bench
  auto* cmd_bench = app.add_subcommand("bench", "run the benchmark suite");
  std::string b_task = "all", b_condition = "annotated", b_world = "train";
  std::string b_out = "bench_out";
  std::string b_fixtures = default_fixtures_root();
  std::uint64_t b_seed = 7;
  bool b_no_dr = false;
  int b_proxy_seeds = 1;
  cmd_bench->add_option("--task", b_task, "place|push_pair|push_edge|reorient|all");
  cmd_bench->add_option("--condition", b_condition, "annotated|automatic|pose-baseline");
  cmd_bench->add_option("--world", b_world, "train|proxy");
  cmd_bench->add_option("--seed", b_seed, "base seed");
  cmd_bench->add_option("--out", b_out, "output directory");
  cmd_bench->add_option("--fixtures", b_fixtures, "fixtures root directory");
  cmd_bench->add_flag("--no-dr", b_no_dr, "train without domain randomization");
  cmd_bench->add_option("--proxy-seeds", b_proxy_seeds,
                        "deployment-proxy episodes per configuration");

  // train
  auto* cmd_train = app.add_subcommand("train", "train one benchmark configuration");
  std::string t_task = "place", t_condition = "annotated";
  std::string t_fixtures = default_fixtures_root();
  std::string t_out = "policy.ckpt";
  int t_config = 0;
  std::uint64_t t_seed = 7;
  bool t_no_dr = false;
  cmd_train->add_option("--task", t_task)->required();
  cmd_train->add_option("--config-id", t_config, "configuration index 0..9");
  cmd_train->add_option("--condition", t_condition);
  cmd_train->add_option("--seed", t_seed);
  cmd_train->add_option("--out", t_out, "checkpoint path");
  cmd_train->add_option("--fixtures", t_fixtures);
  cmd_train->add_flag("--no-dr", t_no_dr);

  // eval
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_task = "place", e_condition = "annotated", e_world = "train";
  std::string e_fixtures = default_fixtures_root();
  std::string e_checkpoint;
  int e_config = 0, e_trials = 128;
  std::uint64_t e_seed = 7;
  cmd_eval->add_option("--checkpoint", e_checkpoint)->required();
  cmd_eval->add_option("--task", e_task)->required();
  cmd_eval->add_option("--config-id", e_config);
  cmd_eval->add_option("--condition", e_condition);
  cmd_eval->add_option("--world", e_world, "train|proxy");
  cmd_eval->add_option("--trials", e_trials);
  cmd_eval->add_option("--seed", e_seed);
  cmd_eval->add_option("--fixtures", e_fixtures);

  // loop
  auto* cmd_loop = app.add_subcommand("loop", "run the plan-train-execute loop");
  std::string l_scene, l_instruction_file, l_planner = "scripted";
  std::string l_scenario, l_out = "loop_out";
  std::string l_fixtures = default_fixtures_root();
  std::uint64_t l_seed = 7;
  bool l_retry = true;
  cmd_loop->add_option("--scenario", l_scenario,
                       "fixture scenario dir (scene.json + instruction.txt + step_*.prog)");
  cmd_loop->add_option("--scene", l_scene, "scene JSON (with --planner live/replay:FILE)");
  cmd_loop->add_option("--instruction", l_instruction_file, "instruction text file");
  cmd_loop->add_option("--planner", l_planner, "scripted|replay:FILE|live|live-pose");
  cmd_loop->add_option("--seed", l_seed);
  cmd_loop->add_option("--out", l_out, "run directory");
  cmd_loop->add_flag("--retry-on-failure,!--no-retry-on-failure", l_retry,
                     "scripted planner reissues failed steps");
  cmd_loop->add_option("--fixtures", l_fixtures);

  // replay
  auto* cmd_replay = app.add_subcommand("replay", "recompute metrics from a trajectory log");
  std::string r_log;
  cmd_replay->add_option("--log", r_log)->required();

  // validate-program
  auto* cmd_validate = app.add_subcommand("validate-program", "parse and validate a program");
  std::string v_program, v_scene;
  cmd_validate->add_option("--program", v_program)->required();
  cmd_validate->add_option("--scene", v_scene)->required();

  // dump-config
  auto* cmd_dump = app.add_subcommand("dump-config", "print the effective config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    Config config = load_config(config_path);

    if (cmd_dump->parsed()) {
      std::fputs(config_to_json_text(config).c_str(), stdout);
      return 0;
    }
    if (cmd_bench->parsed()) {
      return run_bench(b_fixtures, b_task, b_condition, b_world, b_seed, b_no_dr,
                       b_proxy_seeds, b_out, config);
    }
    if (cmd_train->parsed()) {
      auto target = load_train_target(t_fixtures, t_task, t_config, t_condition, config);
      sim::DomainRandomizationConfig dr = config.dr;
      dr.enabled = !t_no_dr;
      rl::PPOConfig ppo = config.ppo;
      ppo.verbose = true;
      auto result =
          rl::train_task(target.pruned, target.spec, dr, config.simulator, ppo, t_seed);
      result.policy.config_hash = config_hash(config);
      rl::save_policy(result.policy, t_out);
      std::printf("trained %s/%d: updates %d, best eval %.3f, %.1fs -> %s\n",
                  t_task.c_str(), t_config, result.updates_run, result.best_eval_success,
                  result.seconds, t_out.c_str());
      return 0;
    }
    if (cmd_eval->parsed()) {
      auto target = load_train_target(e_fixtures, e_task, e_config, e_condition, config);
      auto policy = rl::load_policy(e_checkpoint);
      sim::DomainRandomizationConfig dr = config.dr;
      sim::ObservationNoiseModel noise;
      if (e_world == "proxy") {
        dr = sim::deployment_proxy_of(config.dr);
        noise.enabled = true;
      }
      std::vector<std::uint64_t> seeds(e_trials);
      for (int i = 0; i < e_trials; ++i) seeds[i] = e_seed * 1000003ull + i;
      auto outcomes =
          rl::evaluate_policy(target.pruned, target.spec, dr, config.simulator, policy,
                              config.loop.episode_horizon, seeds, noise);
      int successes = 0;
      double dist = 0.0;
      for (const auto& o : outcomes) {
        successes += o.success ? 1 : 0;
        dist += o.final_mean_distance;
      }
      std::printf("%s/%d %s: success %.3f, mean final distance %.4f m over %d trials\n",
                  e_task.c_str(), e_config, e_world.c_str(),
                  double(successes) / e_trials, dist / e_trials, e_trials);
      return 0;
    }
    if (cmd_loop->parsed()) {
      scene::SceneModel scn;
      std::string instruction;
      std::unique_ptr<plan::PlannerBackend> backend;

      if (!l_scenario.empty()) {
        auto fixture = bench::load_scenario_fixture(l_scenario);
        scn = fixture.scene;
        instruction = fixture.instruction;
        if (l_planner == "scripted")
          backend = std::make_unique<plan::ScriptedPlanner>(fixture.step_programs, l_retry);
      } else {
        if (l_scene.empty()) throw std::runtime_error("--scene or --scenario required");
        scn = scene::load_scene(l_scene);
        if (!l_instruction_file.empty()) instruction = read_text_file(l_instruction_file);
      }
      if (!backend) {
        if (l_planner.rfind("replay:", 0) == 0) {
          backend = std::make_unique<plan::ReplayPlanner>(
              plan::ReplayPlanner::from_file(l_planner.substr(7)));
        } else if (l_planner == "live" || l_planner == "live-pose") {
          auto live = plan::LiveLLMPlanner::config_from_env();
          if (!live)
            throw std::runtime_error(
                "live planner requires PLANNER_API_URL (and optionally "
                "PLANNER_API_KEY, PLANNER_MODEL)");
          live->completion_pointer = config.planner.completion_pointer;
          live->max_attempts = config.planner.max_attempts;
          live->mode = l_planner == "live-pose" ? plan::PromptMode::pose_baseline
                                                : plan::PromptMode::multi_step;
          if (!config.planner.prompt_prefix_file.empty())
            live->prompt_prefix = read_text_file(config.planner.prompt_prefix_file);
          backend = std::make_unique<plan::LiveLLMPlanner>(*live);
        } else {
          throw std::runtime_error("planner '" + l_planner +
                                   "' needs --scenario (scripted) or replay:FILE");
        }
      }

      loop::LoopConfig lc = make_loop_config(config);
      lc.run_dir = l_out;
      auto records = loop::run_loop(scn, instruction, *backend, lc, l_seed);
      for (const auto& r : records) {
        if (r.done) {
          std::printf("iteration %d: done\n", r.index);
        } else if (!r.error.empty()) {
          std::printf("iteration %d: ERROR %s\n", r.index, r.error.c_str());
        } else {
          std::printf(
              "iteration %d: %s -> %s (final dist %.3f m, %d steps, train %.0fs)\n",
              r.index, directive_name(r.program.directive->kind),
              r.deployment.success ? "success" : "failure",
              r.deployment.final_mean_distance, r.deployment.steps, r.train_seconds);
        }
      }
      return 0;
    }
    if (cmd_replay->parsed()) {
      auto result = loop::replay_trajectory(r_log);
      std::printf("%d steps, final mean distance %.4f m, %s\n", result.steps,
                  result.final_mean_distance, result.success ? "success" : "failure");
      return 0;
    }
    if (cmd_validate->parsed()) {
      auto scn = pruned_scene(scene::load_scene(v_scene), config);
      auto program = dsl::parse_program(read_text_file(v_program), scn);
      std::printf("valid %s program\n", program.is_pose_program() ? "pose" : "keypoint");
      std::fputs(dsl::print_program(program).c_str(), stdout);
      return 0;
    }
  } catch (const dsl::ParseError& err) {
    std::fprintf(stderr, "parse error: %s\n", err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
