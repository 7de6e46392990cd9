#include "iker/scene.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace iker::scene {

using nlohmann::json;

const ObjectModel* SceneModel::find_object(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

ObjectModel* SceneModel::find_object(const std::string& id) {
  for (auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const StaticRegion* SceneModel::find_region(const std::string& id) const {
  for (const auto& r : static_regions)
    if (r.id == id) return &r;
  return nullptr;
}

const Keypoint* SceneModel::find_keypoint(int label) const {
  for (const auto& kp : keypoints)
    if (kp.label == label) return &kp;
  return nullptr;
}

Vec3 SceneModel::keypoint_world(
    const Keypoint& kp, const std::map<std::string, Pose>& object_poses) const {
  if (kp.on_static) return kp.local;
  auto it = object_poses.find(kp.object_id);
  if (it == object_poses.end())
    throw std::runtime_error("no pose for object '" + kp.object_id + "'");
  return geom::transform_point(it->second, kp.local);
}

std::map<int, Vec3> SceneModel::keypoint_positions(
    const std::map<std::string, Pose>& object_poses) const {
  std::map<int, Vec3> out;
  for (const auto& kp : keypoints) out[kp.label] = keypoint_world(kp, object_poses);
  return out;
}

std::map<std::string, Pose> SceneModel::initial_poses() const {
  std::map<std::string, Pose> out;
  for (const auto& o : objects) out[o.id] = o.initial_pose;
  return out;
}

double SceneModel::support_height(double x, double y) const {
  double h = 0.0;
  for (const auto& r : static_regions) {
    if (x >= r.min_x && x <= r.max_x && y >= r.min_y && y <= r.max_y)
      h = std::max(h, r.height);
  }
  return h;
}

std::vector<Vec3> object_keypoint_locals(const ObjectModel& obj) {
  const Vec3& h = obj.half_extents;
  return {{h.x, 0.0, 0.0}, {-h.x, 0.0, 0.0}, {0.0, h.y, 0.0}, {0.0, -h.y, 0.0}};
}

std::vector<Vec3> surface_keypoint_locals(const StaticRegion& region,
                                          double spacing) {
  if (spacing <= 0.0) throw std::runtime_error("keypoint spacing must be > 0");
  double w = region.max_x - region.min_x;
  double d = region.max_y - region.min_y;
  if (w < 0.0 || d < 0.0) throw std::runtime_error("empty static region");

  // Number of grid points that fit with the given spacing; the grid is
  // centered so endpoints sit symmetrically inside the region.
  int nx = static_cast<int>(std::floor(w / spacing + 1e-9)) + 1;
  int ny = static_cast<int>(std::floor(d / spacing + 1e-9)) + 1;
  double x0 = 0.5 * (region.min_x + region.max_x) - 0.5 * (nx - 1) * spacing;
  double y0 = 0.5 * (region.min_y + region.max_y) - 0.5 * (ny - 1) * spacing;

  std::vector<Vec3> out;
  out.reserve(static_cast<size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      out.push_back({x0 + ix * spacing, y0 + iy * spacing, region.height});
  return out;
}

void generate_keypoints(SceneModel& scene, double static_spacing) {
  scene.keypoints.clear();
  int label = 1;
  for (const auto& obj : scene.objects) {
    if (!obj.manipulable) continue;
    for (const auto& local : object_keypoint_locals(obj)) {
      Keypoint kp;
      kp.label = label++;
      kp.object_id = obj.id;
      kp.local = local;
      kp.on_static = false;
      scene.keypoints.push_back(kp);
    }
  }
  for (const auto& region : scene.static_regions) {
    if (!region.sample_keypoints) continue;
    for (const auto& world : surface_keypoint_locals(region, static_spacing)) {
      Keypoint kp;
      kp.label = label++;
      kp.object_id = region.id;
      kp.local = world;
      kp.on_static = true;
      scene.keypoints.push_back(kp);
    }
  }
}

namespace {
double projected_distance(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}
}  // namespace

SceneModel prune_and_label(const SceneModel& scene,
                           const std::map<std::string, Pose>& object_poses,
                           double min_separation) {
  std::vector<const Keypoint*> object_kps;
  std::vector<const Keypoint*> static_kps;
  std::map<int, Vec3> world;
  for (const auto& kp : scene.keypoints) {
    world[kp.label] = scene.keypoint_world(kp, object_poses);
    (kp.on_static ? static_kps : object_kps).push_back(&kp);
  }

  std::vector<Keypoint> kept;
  // Rule 1: background keypoints near object keypoints are removed first.
  for (const Keypoint* s : static_kps) {
    bool close = false;
    for (const Keypoint* o : object_kps) {
      if (projected_distance(world[s->label], world[o->label]) < min_separation) {
        close = true;
        break;
      }
    }
    if (!close) kept.push_back(*s);
  }

  // Rule 2: among overlapping object keypoints only the lowest label
  // survives. Processing in ascending label order makes this idempotent.
  std::vector<const Keypoint*> sorted = object_kps;
  std::sort(sorted.begin(), sorted.end(),
            [](const Keypoint* a, const Keypoint* b) { return a->label < b->label; });
  std::vector<const Keypoint*> survivors;
  for (const Keypoint* kp : sorted) {
    bool overlapped = false;
    for (const Keypoint* lower : survivors) {
      if (projected_distance(world[kp->label], world[lower->label]) <
          min_separation) {
        overlapped = true;
        break;
      }
    }
    if (!overlapped) survivors.push_back(kp);
  }

  SceneModel out = scene;
  out.keypoints.clear();
  for (const Keypoint* kp : survivors) out.keypoints.push_back(*kp);
  for (const auto& kp : kept) out.keypoints.push_back(kp);
  std::sort(out.keypoints.begin(), out.keypoints.end(),
            [](const Keypoint& a, const Keypoint& b) { return a.label < b.label; });
  return out;
}

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json pose_to_json(const Pose& p) {
  return {{"position", vec_to_json(p.position)},
          {"orientation", json::array({p.orientation.w, p.orientation.x,
                                       p.orientation.y, p.orientation.z})}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  p.position = vec_from_json(j.at("position"));
  if (j.contains("orientation")) {
    const auto& q = j.at("orientation");
    if (q.is_array() && q.size() == 4) {
      p.orientation = geom::Quat{q[0].get<double>(), q[1].get<double>(),
                                 q[2].get<double>(), q[3].get<double>()}
                          .normalized();
    } else if (q.is_number()) {
      p.orientation = geom::Quat::from_yaw(q.get<double>());
    } else {
      throw std::runtime_error("orientation must be [w,x,y,z] or a yaw angle");
    }
  }
  return p;
}

}  // namespace

SceneModel scene_from_json_text(const std::string& text) {
  json j = json::parse(text);
  SceneModel scene;
  const auto& ws = j.at("workspace");
  scene.workspace.min = vec_from_json(ws.at("min"));
  scene.workspace.max = vec_from_json(ws.at("max"));

  for (const auto& jo : j.at("objects")) {
    ObjectModel obj;
    obj.id = jo.at("id").get<std::string>();
    obj.half_extents = vec_from_json(jo.at("half_extents"));
    if (obj.half_extents.x <= 0.0 || obj.half_extents.y <= 0.0 ||
        obj.half_extents.z <= 0.0)
      throw std::runtime_error("object '" + obj.id + "': half_extents must be > 0");
    obj.manipulable = jo.value("manipulable", true);
    obj.initial_pose = pose_from_json(jo.at("pose"));
    obj.color_tag = jo.value("color_tag", std::string{});
    scene.objects.push_back(obj);
  }

  if (j.contains("static_regions")) {
    for (const auto& jr : j.at("static_regions")) {
      StaticRegion r;
      r.id = jr.at("id").get<std::string>();
      const auto& rect = jr.at("rect");
      r.min_x = rect.at("min")[0].get<double>();
      r.min_y = rect.at("min")[1].get<double>();
      r.max_x = rect.at("max")[0].get<double>();
      r.max_y = rect.at("max")[1].get<double>();
      r.height = jr.value("height", 0.0);
      r.sample_keypoints = jr.value("sample_keypoints", false);
      scene.static_regions.push_back(r);
    }
  }

  for (const auto& obj : scene.objects) {
    if (!scene.workspace.contains(obj.initial_pose.position))
      throw std::runtime_error("object '" + obj.id + "' starts outside the workspace");
  }
  return scene;
}

SceneModel load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json_text(ss.str());
}

std::string scene_to_json_text(const SceneModel& scene) {
  json j;
  j["workspace"] = {{"min", vec_to_json(scene.workspace.min)},
                    {"max", vec_to_json(scene.workspace.max)}};
  j["objects"] = json::array();
  for (const auto& obj : scene.objects) {
    j["objects"].push_back({{"id", obj.id},
                            {"half_extents", vec_to_json(obj.half_extents)},
                            {"manipulable", obj.manipulable},
                            {"pose", pose_to_json(obj.initial_pose)},
                            {"color_tag", obj.color_tag}});
  }
  j["static_regions"] = json::array();
  for (const auto& r : scene.static_regions) {
    j["static_regions"].push_back(
        {{"id", r.id},
         {"rect", {{"min", json::array({r.min_x, r.min_y})},
                   {"max", json::array({r.max_x, r.max_y})}}},
         {"height", r.height},
         {"sample_keypoints", r.sample_keypoints}});
  }
  return j.dump(2) + "\n";
}

void save_scene(const SceneModel& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene file '" + path + "'");
  out << scene_to_json_text(scene);
}

}  // namespace iker::scene
