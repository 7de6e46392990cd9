#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iker/geometry.hpp"

// Scene description and keypoint machinery. Object geometry is analytic:
// manipulable objects are oriented boxes, static elements are horizontal
// rectangles at a fixed height (the table at z = 0, raised shelves above it).

namespace iker::scene {

using geom::Pose;
using geom::Vec3;

struct ObjectModel {
  std::string id;
  Vec3 half_extents;  // componentwise > 0
  bool manipulable = true;
  Pose initial_pose;
  std::string color_tag;
};

// Horizontal rectangular surface at a fixed height. Raised regions
// (height > 0) are solid obstacles from the table up to their top.
struct StaticRegion {
  std::string id;
  double min_x = 0.0, min_y = 0.0;
  double max_x = 0.0, max_y = 0.0;
  double height = 0.0;
  bool sample_keypoints = false;
};

struct Workspace {
  Vec3 min;
  Vec3 max;

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }
  Vec3 clamp(const Vec3& p) const {
    return {geom::clamp(p.x, min.x, max.x), geom::clamp(p.y, min.y, max.y),
            geom::clamp(p.z, min.z, max.z)};
  }
};

// A labeled point either in an object's local frame (manipulable objects)
// or directly in the world frame (static surfaces).
struct Keypoint {
  int label = 0;  // positive, unique scene-wide
  std::string object_id;
  Vec3 local;
  bool on_static = false;
};

struct SceneModel {
  std::vector<ObjectModel> objects;
  std::vector<StaticRegion> static_regions;
  Workspace workspace;
  std::vector<Keypoint> keypoints;

  const ObjectModel* find_object(const std::string& id) const;
  ObjectModel* find_object(const std::string& id);
  const StaticRegion* find_region(const std::string& id) const;
  const Keypoint* find_keypoint(int label) const;

  // World position given current object poses; static keypoints are
  // already in the world frame.
  Vec3 keypoint_world(const Keypoint& kp,
                      const std::map<std::string, Pose>& object_poses) const;
  std::map<int, Vec3> keypoint_positions(
      const std::map<std::string, Pose>& object_poses) const;

  std::map<std::string, Pose> initial_poses() const;

  // Highest static surface under (x, y); the table at z = 0 is implicit.
  double support_height(double x, double y) const;
};

// Four keypoints at the extremities of the two horizontal axes, in the
// object frame: (+-hx, 0, 0) and (0, +-hy, 0). Labels are filled in by
// generate_keypoints.
std::vector<Vec3> object_keypoint_locals(const ObjectModel& obj);

// Uniform grid across a static surface with the given spacing, centered in
// the region; spacing larger than the region degenerates to its center.
std::vector<Vec3> surface_keypoint_locals(const StaticRegion& region,
                                          double spacing);

// Assign labels: manipulable objects first in declaration order (4 each,
// contiguous blocks), then sampled static surfaces row-major.
void generate_keypoints(SceneModel& scene, double static_spacing);

// Top-down overlap pruning. Static keypoints within min_separation of any
// object keypoint go first; among remaining overlapping object keypoints
// only the lowest label survives. Labels are not renumbered.
SceneModel prune_and_label(const SceneModel& scene,
                           const std::map<std::string, Pose>& object_poses,
                           double min_separation);

SceneModel load_scene(const std::string& path);
SceneModel scene_from_json_text(const std::string& text);
std::string scene_to_json_text(const SceneModel& scene);
void save_scene(const SceneModel& scene, const std::string& path);

}  // namespace iker::scene
