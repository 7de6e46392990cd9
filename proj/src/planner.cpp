#include "iker/planner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace iker::plan {

using nlohmann::json;

ObservationSummary make_observation(const scene::SceneModel& pruned,
                                    const std::map<std::string, Pose>& poses,
                                    const std::string& instruction,
                                    bool include_color_tags) {
  ObservationSummary obs;
  obs.workspace = pruned.workspace;
  obs.instruction = instruction;
  obs.include_color_tags = include_color_tags;
  for (const auto& kp : pruned.keypoints) {
    KeypointView view;
    view.label = kp.label;
    view.world = pruned.keypoint_world(kp, poses);
    if (include_color_tags && !kp.on_static) {
      const auto* obj = pruned.find_object(kp.object_id);
      if (obj != nullptr) view.color_tag = obj->color_tag;
    }
    obs.keypoints.push_back(view);
  }
  return obs;
}

namespace {

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string serialize_observation(const ObservationSummary& obs) {
  std::ostringstream out;
  out << "instruction: " << obs.instruction << "\n";
  out << "workspace: x [" << two_decimals(obs.workspace.min.x) << ", "
      << two_decimals(obs.workspace.max.x) << "], y ["
      << two_decimals(obs.workspace.min.y) << ", " << two_decimals(obs.workspace.max.y)
      << "], z [" << two_decimals(obs.workspace.min.z) << ", "
      << two_decimals(obs.workspace.max.z) << "]\n";
  out << "keypoints:\n";
  for (const auto& kp : obs.keypoints) {
    out << "  " << kp.label << ": (" << two_decimals(kp.world.x) << ", "
        << two_decimals(kp.world.y) << ", " << two_decimals(kp.world.z) << ")";
    if (obs.include_color_tags && !kp.color_tag.empty()) out << " [" << kp.color_tag << "]";
    out << "\n";
  }
  return out.str();
}

namespace {

const char* kCommonRules = R"(You control a robot gripper above a tabletop workspace.
The observation lists numbered keypoints with 3D world coordinates in meters.
Some keypoints belong to movable objects, others to static surfaces; infer the
grouping from the coordinates. Decide which object to interact with and where
its keypoints must end up to make progress on the instruction.

Output rules:
- Emit exactly one directive line: grasp(<object>) to pick up and place, or
  push(<object>) to slide without grasping.
- Emit goal statements of the form: target[<label>] = <expr>
  with <expr> built from: kp(<label>), vec(x, y, z), scalar * <expr>,
  <expr> + <expr>, <expr> - <expr>, mid(<expr>, <expr>),
  centroid(<label>, ...), offset_along(<a>, <b>, <distance>).
- Assign target[...] only for keypoints of the object named in the directive.
- Distances are meters. Output only program lines, one per line, no prose.
- If the instructed task is already complete, output exactly: done = true
)";

const char* kMultiStepNote =
    R"(The task may need several steps. Plan only the next step now; after it
executes you will be queried again with the outcome appended to the history.
Set done = true only once the whole instruction is satisfied.
)";

const char* kPoseRules = R"(You control a robot gripper above a tabletop workspace.
The observation lists numbered keypoints with 3D world coordinates in meters.
Decide which object to interact with and what its final pose should be.

Output rules:
- Emit exactly one directive line: grasp(<object>) or push(<object>).
- Emit one goal pose per moved object:
  pose_target[<object>] = pose(x, y, z, roll, pitch, yaw)
  with xyz in meters (world frame) and roll-pitch-yaw in radians.
- Output only program lines, one per line, no prose.
- If the instructed task is already complete, output exactly: done = true
)";

}  // namespace

std::string build_prompt(const ObservationSummary& obs, const ExecutionHistory& history,
                         PromptMode mode) {
  std::ostringstream out;
  out << (mode == PromptMode::pose_baseline ? kPoseRules : kCommonRules);
  if (mode == PromptMode::multi_step) out << kMultiStepNote;
  out << "\ncurrent observation:\n" << serialize_observation(obs);
  int index = 1;
  for (const auto& entry : history) {
    out << "\n--- executed step " << index++ << " ---\n";
    out << "observation at that step:\n" << entry.observation_summary;
    out << "program:\n" << dsl::print_program(entry.program);
    out << "outcome: " << (entry.outcome.success ? "success" : "failure")
        << ", final mean keypoint distance "
        << two_decimals(entry.outcome.final_mean_distance) << " m\n";
  }
  out << "\nnext program:\n";
  return out.str();
}

dsl::KeypointProgram ScriptedPlanner::plan(const ObservationSummary& obs,
                                           const ExecutionHistory& history,
                                           const scene::SceneModel& scn) {
  (void)obs;
  size_t successes = 0;
  for (const auto& e : history) successes += e.outcome.success ? 1 : 0;

  size_t next;
  if (retry_on_failure_) {
    // reissue the step that failed; advance only past successes
    next = successes;
  } else {
    next = history.size();
  }
  if (next >= steps_.size() || (retry_on_failure_ && successes >= steps_.size()))
    return dsl::parse_program("done = true", scn);
  return dsl::parse_program(steps_[next], scn);
}

ReplayPlanner ReplayPlanner::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open replay fixture '" + path + "'");
  std::vector<std::string> programs;
  std::string current;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("---", 0) == 0) {
      if (!current.empty()) programs.push_back(current);
      current.clear();
    } else {
      current += line;
      current += '\n';
    }
  }
  if (!current.empty()) programs.push_back(current);
  return ReplayPlanner(std::move(programs));
}

dsl::KeypointProgram ReplayPlanner::plan(const ObservationSummary& obs,
                                         const ExecutionHistory& history,
                                         const scene::SceneModel& scn) {
  (void)obs;
  if (history.size() >= programs_.size()) return dsl::parse_program("done = true", scn);
  return dsl::parse_program(programs_[history.size()], scn);
}

LiveLLMPlanner::LiveLLMPlanner(LiveLLMConfig config) : config_(std::move(config)) {
  if (config_.api_url.empty())
    throw std::runtime_error("live planner requires an api url (PLANNER_API_URL)");
}

std::optional<LiveLLMConfig> LiveLLMPlanner::config_from_env() {
  const char* url = std::getenv("PLANNER_API_URL");
  if (url == nullptr || *url == '\0') return std::nullopt;
  LiveLLMConfig config;
  config.api_url = url;
  if (const char* key = std::getenv("PLANNER_API_KEY")) config.api_key = key;
  if (const char* model = std::getenv("PLANNER_MODEL")) config.model = model;
  return config;
}

std::string LiveLLMPlanner::request_completion(
    const std::vector<std::pair<std::string, std::string>>& messages) {
  // split scheme://host[:port]/path
  std::string url = config_.api_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw std::runtime_error("malformed planner url '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  json body;
  body["model"] = config_.model;
  body["messages"] = json::array();
  for (const auto& [role, content] : messages)
    body["messages"].push_back({{"role", role}, {"content", content}});

  httplib::Client client(base);
  client.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw std::runtime_error("planner transport error: " +
                             httplib::to_string(res.error()));
  if (res->status != 200)
    throw std::runtime_error("planner http status " + std::to_string(res->status) +
                             ": " + res->body);
  json parsed = json::parse(res->body);
  json::json_pointer pointer(config_.completion_pointer);
  if (!parsed.contains(pointer))
    throw std::runtime_error("planner response missing completion at '" +
                             config_.completion_pointer + "'");
  last_raw_ = parsed.at(pointer).get<std::string>();
  return last_raw_;
}

dsl::KeypointProgram LiveLLMPlanner::plan(const ObservationSummary& obs,
                                          const ExecutionHistory& history,
                                          const scene::SceneModel& scn) {
  std::vector<std::pair<std::string, std::string>> messages;
  std::string prompt = build_prompt(obs, history, config_.mode);
  if (!config_.prompt_prefix.empty()) prompt = config_.prompt_prefix + "\n" + prompt;
  messages.emplace_back("user", prompt);

  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    std::string completion = request_completion(messages);
    try {
      return dsl::parse_program(completion, scn);
    } catch (const dsl::ParseError& err) {
      if (attempt == config_.max_attempts) break;
      messages.emplace_back("assistant", completion);
      messages.emplace_back(
          "user", std::string("That program failed to validate: ") + err.what() +
                      "\nEmit a corrected program, only program lines.");
    }
  }
  throw std::runtime_error("planner exhausted retries");
}

geom::Quat rpy_to_quat(const Vec3& rpy) {
  geom::Quat qx = geom::Quat::from_axis_angle({1, 0, 0}, rpy.x);
  geom::Quat qy = geom::Quat::from_axis_angle({0, 1, 0}, rpy.y);
  geom::Quat qz = geom::Quat::from_axis_angle({0, 0, 1}, rpy.z);
  return (qz * qy * qx).normalized();
}

std::map<int, Vec3> pose_program_to_targets(const dsl::KeypointProgram& program,
                                            const scene::SceneModel& scn) {
  std::map<int, Vec3> targets;
  for (const auto& pt : program.pose_statements) {
    const auto* obj = scn.find_object(pt.object_id);
    if (obj == nullptr)
      throw std::runtime_error("unknown object '" + pt.object_id + "'");
    Pose goal;
    goal.position = pt.position;
    goal.orientation = rpy_to_quat(pt.rpy);
    for (const auto& kp : scn.keypoints) {
      if (kp.on_static || kp.object_id != pt.object_id) continue;
      targets[kp.label] = geom::transform_point(goal, kp.local);
    }
  }
  return targets;
}

dsl::KeypointProgram query_planner(PlannerBackend& backend, const ObservationSummary& obs,
                                   const ExecutionHistory& history,
                                   const scene::SceneModel& scn) {
  return backend.plan(obs, history, scn);
}

}  // namespace iker::plan
