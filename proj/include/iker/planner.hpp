#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iker/program.hpp"
#include "iker/scene.hpp"

// Planner backends produce keypoint programs from a serialized scene
// observation, the task instruction, and the execution history of previous
// steps. Interchangeable: scripted ground truth, replayed fixtures, or a
// live chat-model endpoint.

namespace iker::plan {

using geom::Pose;
using geom::Vec3;

struct KeypointView {
  int label = 0;
  Vec3 world;
  std::string color_tag;
};

struct ObservationSummary {
  std::vector<KeypointView> keypoints;  // unpruned keypoints only
  scene::Workspace workspace;
  std::string instruction;
  bool include_color_tags = true;
};

ObservationSummary make_observation(const scene::SceneModel& pruned,
                                    const std::map<std::string, Pose>& poses,
                                    const std::string& instruction,
                                    bool include_color_tags = true);

// Keypoint coordinates rounded to 2 decimals, one per line.
std::string serialize_observation(const ObservationSummary& obs);

struct StepOutcome {
  bool success = false;
  double final_mean_distance = 0.0;
};

struct HistoryEntry {
  std::string observation_summary;
  dsl::KeypointProgram program;
  StepOutcome outcome;
};

// Append-only record of (observation, program, outcome) per executed step.
using ExecutionHistory = std::vector<HistoryEntry>;

enum class PromptMode { single_step, multi_step, pose_baseline };

// Deterministic prompt: role instructions, the serialized observation, then
// history blocks oldest first.
std::string build_prompt(const ObservationSummary& obs, const ExecutionHistory& history,
                         PromptMode mode);

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  // returns a program validated against `scn`
  virtual dsl::KeypointProgram plan(const ObservationSummary& obs,
                                    const ExecutionHistory& history,
                                    const scene::SceneModel& scn) = 0;
  virtual std::string name() const = 0;
};

// Hand-authored step programs (the human-labeled condition). Stateless over
// calls: the next program index is the number of successful history entries;
// with retry_on_failure the failed step is reissued, otherwise steps advance
// with the history regardless of outcome.
class ScriptedPlanner : public PlannerBackend {
 public:
  ScriptedPlanner(std::vector<std::string> step_programs, bool retry_on_failure)
      : steps_(std::move(step_programs)), retry_on_failure_(retry_on_failure) {}

  dsl::KeypointProgram plan(const ObservationSummary& obs,
                            const ExecutionHistory& history,
                            const scene::SceneModel& scn) override;
  std::string name() const override { return "scripted"; }

 private:
  std::vector<std::string> steps_;
  bool retry_on_failure_;
};

// Fixture programs returned in order, then done (ignores outcomes).
class ReplayPlanner : public PlannerBackend {
 public:
  explicit ReplayPlanner(std::vector<std::string> programs)
      : programs_(std::move(programs)) {}
  static ReplayPlanner from_file(const std::string& path);

  dsl::KeypointProgram plan(const ObservationSummary& obs,
                            const ExecutionHistory& history,
                            const scene::SceneModel& scn) override;
  std::string name() const override { return "replay"; }

 private:
  std::vector<std::string> programs_;
};

struct LiveLLMConfig {
  std::string api_url;     // defaults from PLANNER_API_URL
  std::string api_key;     // PLANNER_API_KEY
  std::string model;       // PLANNER_MODEL
  std::string completion_pointer = "/choices/0/message/content";
  PromptMode mode = PromptMode::multi_step;
  int max_attempts = 3;
  std::string prompt_prefix;  // optional in-context examples, prepended
};

// Chat-model endpoint speaking {model, messages:[{role, content}]}. A parse
// failure is fed back as a follow-up message, up to max_attempts.
class LiveLLMPlanner : public PlannerBackend {
 public:
  explicit LiveLLMPlanner(LiveLLMConfig config);
  static std::optional<LiveLLMConfig> config_from_env();

  dsl::KeypointProgram plan(const ObservationSummary& obs,
                            const ExecutionHistory& history,
                            const scene::SceneModel& scn) override;
  std::string name() const override { return "live"; }

  const std::string& last_raw_response() const { return last_raw_; }

 private:
  std::string request_completion(const std::vector<std::pair<std::string, std::string>>& messages);
  LiveLLMConfig config_;
  std::string last_raw_;
};

// Roll-pitch-yaw (XYZ, applied in ZYX order) to quaternion.
geom::Quat rpy_to_quat(const Vec3& rpy);

// Converts pose-baseline goals into keypoint targets by transforming each
// object's local keypoints by its goal pose, so both planner conditions
// train with identical reward machinery.
std::map<int, Vec3> pose_program_to_targets(const dsl::KeypointProgram& program,
                                            const scene::SceneModel& scn);

// Shared entry point: asks the backend for a program; parse errors from the
// live backend retry inside the backend, other backends fail hard.
dsl::KeypointProgram query_planner(PlannerBackend& backend, const ObservationSummary& obs,
                                   const ExecutionHistory& history,
                                   const scene::SceneModel& scn);

}  // namespace iker::plan
