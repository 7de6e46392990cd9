#include "iker/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "iker/rng.hpp"

namespace iker::sim {

namespace {

Range shift_range(const Range& r, double phys_lo, double phys_hi) {
  double offset = 0.25 * r.width();
  return {geom::clamp(r.lo + offset, phys_lo, phys_hi),
          geom::clamp(r.hi + offset, phys_lo, phys_hi)};
}

double cross_z(const Vec3& a, const Vec3& b) { return a.x * b.y - a.y * b.x; }

}  // namespace

DomainRandomizationConfig deployment_proxy_of(const DomainRandomizationConfig& dr) {
  DomainRandomizationConfig out = dr;
  out.enabled = true;
  out.scale = shift_range(dr.scale, 0.05, 3.0);
  out.mass = shift_range(dr.mass, 0.01, 10.0);
  out.friction = shift_range(dr.friction, 0.01, 5.0);
  out.restitution = shift_range(dr.restitution, 0.0, 1.0);
  out.compliance = shift_range(dr.compliance, 0.0, 1.0);
  out.com_offset = shift_range(dr.com_offset, -0.2, 0.2);
  out.initial_position = shift_range(dr.initial_position, -1.0, 1.0);
  out.initial_orientation = shift_range(dr.initial_orientation, -3.14, 3.14);
  out.gripper_home_xy = shift_range(dr.gripper_home_xy, -1.0, 1.0);
  out.gripper_home_z = shift_range(dr.gripper_home_z, -1.0, 1.0);
  out.grasp_position = shift_range(dr.grasp_position, -1.0, 1.0);
  out.grasp_orientation = shift_range(dr.grasp_orientation, -3.14, 3.14);
  return out;
}

double slip_factor(double friction, const SimConfig& config) {
  return geom::clamp(friction / config.friction_reference, config.slip_min, 1.0);
}

double effective_slip(const PerObjectParams& obj, const SimConfig& config) {
  double jitter = 1.0 + config.compliance_slip_jitter * (obj.compliance - 0.5);
  return geom::clamp(slip_factor(obj.friction, config) * jitter, 0.05, 1.0);
}

Vec3 scaled_half_extents(const scene::ObjectModel& obj, const EpisodeParams& params) {
  auto it = params.objects.find(obj.id);
  double s = it == params.objects.end() ? 1.0 : it->second.scale;
  return obj.half_extents * s;
}

Vec3 world_aabb_half_extents(const Quat& orientation, const Vec3& half) {
  Vec3 ex = orientation.rotate({half.x, 0.0, 0.0});
  Vec3 ey = orientation.rotate({0.0, half.y, 0.0});
  Vec3 ez = orientation.rotate({0.0, 0.0, half.z});
  return {std::abs(ex.x) + std::abs(ey.x) + std::abs(ez.x),
          std::abs(ex.y) + std::abs(ey.y) + std::abs(ez.y),
          std::abs(ex.z) + std::abs(ey.z) + std::abs(ez.z)};
}

Pose settled_pose(const Pose& pose, const Vec3& scaled_half, const SceneModel& scene) {
  Pose out = pose;
  // project to yaw-only unless the pose is already flat
  if (std::abs(pose.orientation.x) > 1e-12 || std::abs(pose.orientation.y) > 1e-12)
    out.orientation = Quat::from_yaw(pose.orientation.yaw());
  Vec3 aabb = world_aabb_half_extents(out.orientation, scaled_half);
  double support = scene.support_height(out.position.x, out.position.y);
  out.position.z = support + aabb.z;
  return out;
}

namespace {

// 2D separating-axis overlap test for yaw-oriented boxes.
bool boxes_overlap_2d(const Pose& pa, const Vec3& ha, const Pose& pb, const Vec3& hb) {
  auto corners = [](const Pose& p, const Vec3& h) {
    double yaw = p.orientation.yaw();
    double c = std::cos(yaw), s = std::sin(yaw);
    std::array<std::pair<double, double>, 4> out;
    const double sx[4] = {1, 1, -1, -1};
    const double sy[4] = {1, -1, 1, -1};
    for (int i = 0; i < 4; ++i) {
      double lx = sx[i] * h.x, ly = sy[i] * h.y;
      out[i] = {p.position.x + c * lx - s * ly, p.position.y + s * lx + c * ly};
    }
    return out;
  };
  auto ca = corners(pa, ha);
  auto cb = corners(pb, hb);
  auto separated_on = [&](double ax, double ay) {
    double amin = 1e30, amax = -1e30, bmin = 1e30, bmax = -1e30;
    for (auto& [x, y] : ca) {
      double d = x * ax + y * ay;
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (auto& [x, y] : cb) {
      double d = x * ax + y * ay;
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    return amax < bmin || bmax < amin;
  };
  double ya = pa.orientation.yaw(), yb = pb.orientation.yaw();
  const double axes[4][2] = {{std::cos(ya), std::sin(ya)},
                             {-std::sin(ya), std::cos(ya)},
                             {std::cos(yb), std::sin(yb)},
                             {-std::sin(yb), std::cos(yb)}};
  for (auto& ax : axes)
    if (separated_on(ax[0], ax[1])) return false;
  return true;
}

// Push a sphere center out of the solid box a static region occupies
// (z from 0 to region height over its rectangle).
Vec3 resolve_sphere_vs_region(const Vec3& center, double radius,
                              const scene::StaticRegion& region) {
  if (region.height <= 0.0) return center;
  Vec3 closest{geom::clamp(center.x, region.min_x, region.max_x),
               geom::clamp(center.y, region.min_y, region.max_y),
               geom::clamp(center.z, 0.0, region.height)};
  Vec3 d = center - closest;
  double dist = d.norm();
  if (dist >= radius) return center;
  if (dist > 1e-12) return closest + d * (radius / dist);
  // center inside the box: exit along the cheapest face, top preferred on ties
  double up = region.height + radius - center.z;
  double xlo = center.x - (region.min_x - radius);
  double xhi = region.max_x + radius - center.x;
  double ylo = center.y - (region.min_y - radius);
  double yhi = region.max_y + radius - center.y;
  double m = std::min({up, xlo, xhi, ylo, yhi});
  Vec3 out = center;
  if (m == up)
    out.z = region.height + radius;
  else if (m == xlo)
    out.x = region.min_x - radius;
  else if (m == xhi)
    out.x = region.max_x + radius;
  else if (m == ylo)
    out.y = region.min_y - radius;
  else
    out.y = region.max_y + radius;
  return out;
}

// Minimal translation that separates a world-frame AABB from a region box.
// Zero vector when already separate.
Vec3 aabb_region_resolution(const Vec3& center, const Vec3& half,
                            const scene::StaticRegion& region) {
  if (region.height <= 0.0) return {};
  double ox = std::min(center.x + half.x, region.max_x) -
              std::max(center.x - half.x, region.min_x);
  double oy = std::min(center.y + half.y, region.max_y) -
              std::max(center.y - half.y, region.min_y);
  double oz = std::min(center.z + half.z, region.height) -
              std::max(center.z - half.z, 0.0);
  if (ox <= 1e-12 || oy <= 1e-12 || oz <= 1e-12) return {};
  double rx = region.min_x + 0.5 * (region.max_x - region.min_x);
  double ry = region.min_y + 0.5 * (region.max_y - region.min_y);
  // smallest face-exit; vertical resolution only upward
  double up = region.height - (center.z - half.z);
  if (up <= ox && up <= oy) return {0.0, 0.0, up};
  if (ox <= oy) return {center.x >= rx ? ox : -ox, 0.0, 0.0};
  return {0.0, center.y >= ry ? oy : -oy, 0.0};
}

Vec3 clamp_gripper(const Vec3& p, const SceneModel& scene, const SimConfig& config) {
  Vec3 out = scene.workspace.clamp(p);
  out.z = std::max(out.z, config.gripper_radius);
  for (const auto& r : scene.static_regions)
    out = resolve_sphere_vs_region(out, config.gripper_radius, r);
  return scene.workspace.clamp(out);
}

struct SphereBoxContact {
  bool touching = false;
  double depth = 0.0;
  Vec3 normal;  // unit, from box surface toward sphere center
  Vec3 point;   // closest point on/in the box, world frame
};

SphereBoxContact sphere_vs_box(const Vec3& center, double radius, const Pose& box_pose,
                               const Vec3& half) {
  SphereBoxContact c;
  Pose inv = geom::invert(box_pose);
  Vec3 local = geom::transform_point(inv, center);
  Vec3 clamped{geom::clamp(local.x, -half.x, half.x),
               geom::clamp(local.y, -half.y, half.y),
               geom::clamp(local.z, -half.z, half.z)};
  Vec3 d = local - clamped;
  double dist = d.norm();
  if (dist > 1e-12) {
    if (dist >= radius) return c;
    c.touching = true;
    c.depth = radius - dist;
    c.normal = box_pose.orientation.rotate(d * (1.0 / dist));
    c.point = geom::transform_point(box_pose, clamped);
    return c;
  }
  // center inside the box: use the nearest face
  double px = half.x - std::abs(local.x);
  double py = half.y - std::abs(local.y);
  double pz = half.z - std::abs(local.z);
  Vec3 n_local;
  double inside;
  if (px <= py && px <= pz) {
    n_local = {local.x >= 0.0 ? 1.0 : -1.0, 0.0, 0.0};
    inside = px;
  } else if (py <= pz) {
    n_local = {0.0, local.y >= 0.0 ? 1.0 : -1.0, 0.0};
    inside = py;
  } else {
    n_local = {0.0, 0.0, local.z >= 0.0 ? 1.0 : -1.0};
    inside = pz;
  }
  c.touching = true;
  c.depth = radius + inside;
  c.normal = box_pose.orientation.rotate(n_local);
  c.point = geom::transform_point(box_pose, clamped);
  return c;
}

double force_scale(const PerObjectParams& obj, const SimConfig& config) {
  return config.force_accumulator_scale * (obj.mass / config.force_mass_reference) *
         (1.0 + config.restitution_force_gain * (obj.restitution - 0.5)) *
         (1.0 - config.compliance_force_gain * (obj.compliance - 0.5));
}

}  // namespace

std::pair<SimState, EpisodeParams> reset(const SceneModel& scene,
                                         const DomainRandomizationConfig& dr,
                                         const SimConfig& config,
                                         std::uint64_t seed) {
  Rng rng(seed);
  EpisodeParams params;

  auto sample = [&](const Range& r) { return dr.enabled ? rng.uniform(r.lo, r.hi) : r.mid(); };
  auto sample_noise = [&](const Range& r) { return dr.enabled ? rng.uniform(r.lo, r.hi) : 0.0; };

  for (const auto& obj : scene.objects) {
    if (!obj.manipulable) continue;
    PerObjectParams p;
    p.scale = sample(dr.scale);
    p.mass = sample(dr.mass);
    p.friction = sample(dr.friction);
    p.restitution = sample(dr.restitution);
    p.compliance = sample(dr.compliance);
    p.com_offset = {sample_noise(dr.com_offset), sample_noise(dr.com_offset), 0.0};
    params.objects[obj.id] = p;
  }

  SimState state;
  bool placed = false;
  for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
    for (const auto& obj : scene.objects) {
      if (!obj.manipulable) continue;
      auto& p = params.objects[obj.id];
      p.position_noise = {sample_noise(dr.initial_position),
                          sample_noise(dr.initial_position), 0.0};
      p.orientation_noise = sample_noise(dr.initial_orientation);
    }
    state.object_poses.clear();
    for (const auto& obj : scene.objects) {
      Pose pose = obj.initial_pose;
      if (obj.manipulable) {
        const auto& p = params.objects[obj.id];
        pose.position += p.position_noise;
        if (p.orientation_noise != 0.0)
          pose.orientation =
              (Quat::from_yaw(p.orientation_noise) * pose.orientation).normalized();
        pose = settled_pose(pose, scaled_half_extents(obj, params), scene);
      }
      state.object_poses[obj.id] = pose;
    }
    placed = true;
    for (size_t i = 0; i < scene.objects.size() && placed; ++i) {
      for (size_t j = i + 1; j < scene.objects.size() && placed; ++j) {
        const auto& a = scene.objects[i];
        const auto& b = scene.objects[j];
        if (!a.manipulable || !b.manipulable) continue;
        if (boxes_overlap_2d(state.object_poses[a.id], scaled_half_extents(a, params),
                             state.object_poses[b.id], scaled_half_extents(b, params)))
          placed = false;
      }
    }
    if (!dr.enabled) break;  // nothing to resample
  }
  if (!placed) throw std::runtime_error("unplaceable scene");

  params.gripper_position_noise = {sample_noise(dr.gripper_home_xy),
                                   sample_noise(dr.gripper_home_xy),
                                   sample_noise(dr.gripper_home_z)};
  params.grasp_position_noise = {sample_noise(dr.grasp_position),
                                 sample_noise(dr.grasp_position),
                                 sample_noise(dr.grasp_position)};
  params.grasp_orientation_noise = sample_noise(dr.grasp_orientation);

  state.gripper.position =
      clamp_gripper(config.gripper_home + params.gripper_position_noise, scene, config);
  state.gripper.orientation = Quat::from_yaw(config.gripper_home_yaw);
  return {state, params};
}

SimState step(const SimState& state, const ActionDelta& action, const SceneModel& scene,
              const EpisodeParams& params, const SimConfig& config) {
  SimState next = state;
  next.step_count = state.step_count + 1;

  ActionDelta a;
  a.dp = {geom::clamp(action.dp.x, -config.max_translation_step, config.max_translation_step),
          geom::clamp(action.dp.y, -config.max_translation_step, config.max_translation_step),
          geom::clamp(action.dp.z, -config.max_translation_step, config.max_translation_step)};
  a.dr = {geom::clamp(action.dr.x, -config.max_rotation_step, config.max_rotation_step),
          geom::clamp(action.dr.y, -config.max_rotation_step, config.max_rotation_step),
          geom::clamp(action.dr.z, -config.max_rotation_step, config.max_rotation_step)};

  Pose gripper = geom::integrate_action(state.gripper, a);
  gripper.position = clamp_gripper(gripper.position, scene, config);

  if (next.grasped_object) {
    const auto& id = *next.grasped_object;
    const auto* obj = scene.find_object(id);
    const auto& p = params.objects.at(id);
    Vec3 half = obj->half_extents * p.scale;

    // carry rigidly; collisions move the gripper so the attachment stays exact
    for (int pass = 0; pass < 3; ++pass) {
      Pose obj_pose = geom::compose(gripper, next.grasp_transform);
      Vec3 aabb = world_aabb_half_extents(obj_pose.orientation, half);
      Vec3 fix{};
      double support =
          scene.support_height(obj_pose.position.x, obj_pose.position.y);
      double deficit = support + aabb.z - obj_pose.position.z;
      if (deficit > 0.0) fix.z = std::max(fix.z, deficit);
      for (const auto& r : scene.static_regions) {
        Vec3 res = aabb_region_resolution(obj_pose.position, aabb, r);
        if (res.norm() > fix.norm()) fix = res;
      }
      if (fix.norm() <= 1e-12) break;
      gripper.position = gripper.position + fix;
      next.violations.contact_impulse_sum += fix.norm() * force_scale(p, config);
    }
    next.gripper = gripper;
    next.object_poses[id] = geom::compose(gripper, next.grasp_transform);
  } else {
    next.gripper = gripper;
    // quasi-static pushing, pairwise gripper-object
    for (const auto& obj : scene.objects) {
      if (!obj.manipulable) continue;
      const auto& p = params.objects.at(obj.id);
      Vec3 half = obj.half_extents * p.scale;
      Pose obj_pose = next.object_poses[obj.id];

      auto contact =
          sphere_vs_box(next.gripper.position, config.gripper_radius, obj_pose, half);
      if (!contact.touching) continue;

      double slip = effective_slip(p, config);
      Vec3 n_h{contact.normal.x, contact.normal.y, 0.0};
      double horizontal = n_h.norm();
      // friction drags the object with the tangential part of the gripper
      // motion on any contact; side contact additionally pushes it out
      // along the penetration-resolution direction. Only the tangential
      // component torques the object, so straight face pushes do not spin.
      Vec3 motion = next.gripper.position - state.gripper.position;
      motion.z = 0.0;
      Vec3 shift{};
      Vec3 tangential{};
      if (horizontal > 0.2) {
        Vec3 push_dir = (-1.0 / horizontal) * n_h;
        tangential = (motion - push_dir * motion.dot(push_dir)) * slip;
        shift = push_dir * (slip * contact.depth) + tangential;
      } else {
        tangential = motion * slip;
        shift = tangential;
      }
      if (shift.norm() > 1e-12) {
        Vec3 com_world = obj_pose.position + obj_pose.orientation.rotate(p.com_offset);
        Vec3 lever = contact.point - com_world;
        lever.z = 0.0;
        double dyaw = geom::clamp(config.rotation_gain * cross_z(lever, tangential),
                                  -config.max_push_rotation, config.max_push_rotation);
        obj_pose.position += shift;
        obj_pose.orientation =
            (Quat::from_yaw(dyaw) * obj_pose.orientation).normalized();

        // blocked by raised regions and the workspace boundary
        Vec3 aabb = world_aabb_half_extents(obj_pose.orientation, half);
        for (const auto& r : scene.static_regions)
          obj_pose.position += aabb_region_resolution(obj_pose.position, aabb, r);
        Vec3 clamped = scene.workspace.clamp(obj_pose.position);
        if ((clamped - obj_pose.position).norm() > 1e-12)
          next.violations.out_of_workspace = true;
        obj_pose.position = clamped;
        obj_pose = settled_pose(obj_pose, half, scene);
        next.violations.contact_impulse_sum +=
            contact.depth * force_scale(p, config);
      }

      // whatever penetration remains blocks the gripper
      for (int pass = 0; pass < 2; ++pass) {
        auto res =
            sphere_vs_box(next.gripper.position, config.gripper_radius, obj_pose, half);
        if (!res.touching || res.depth <= config.penetration_tolerance) break;
        next.gripper.position += res.normal * res.depth;
        next.violations.contact_impulse_sum += res.depth * force_scale(p, config);
      }
      next.gripper.position = scene.workspace.clamp(next.gripper.position);
      next.object_poses[obj.id] = obj_pose;
    }
  }

  // free objects rest on their support
  for (const auto& obj : scene.objects) {
    if (!obj.manipulable) continue;
    if (next.grasped_object && *next.grasped_object == obj.id) continue;
    const auto& p = params.objects.at(obj.id);
    Pose settled =
        settled_pose(next.object_poses[obj.id], obj.half_extents * p.scale, scene);
    next.object_poses[obj.id] = settled;
  }
  if (next.pending_drop) {
    next.violations.dropped = true;
    next.pending_drop = false;
  }
  return next;
}

SimState try_grasp(const SimState& state, const std::string& target,
                   const SceneModel& scene, const EpisodeParams& params,
                   const SimConfig& config) {
  const auto* obj = scene.find_object(target);
  if (obj == nullptr || !obj->manipulable)
    throw std::runtime_error("not manipulable: '" + target + "'");
  if (state.grasped_object)
    throw std::runtime_error("gripper already holds '" + *state.grasped_object + "'");

  const auto& p = params.objects.at(target);
  Vec3 half = obj->half_extents * p.scale;
  const Pose obj_pose = state.object_poses.at(target);

  // top-down grasp at the center, fingers across the shorter horizontal axis
  double yaw = obj_pose.orientation.yaw();
  if (half.y > half.x) yaw += 1.57079632679489661923;
  yaw += params.grasp_orientation_noise;

  SimState next = state;
  next.gripper.position = obj_pose.position + params.grasp_position_noise;
  next.gripper.orientation = Quat::from_yaw(yaw);
  next.gripper_open = true;

  Vec3 offset_local =
      geom::transform_point(geom::invert(obj_pose), next.gripper.position);
  bool within = std::abs(offset_local.x) < half.x && std::abs(offset_local.y) < half.y &&
                std::abs(offset_local.z) < half.z;
  if (within) {
    next.gripper_open = false;
    next.grasped_object = target;
    next.grasp_transform = geom::compose(geom::invert(next.gripper), obj_pose);
  }
  return next;
}

SimState release(const SimState& state, const SceneModel& scene,
                 const EpisodeParams& params, bool intentional) {
  SimState next = state;
  if (!next.grasped_object) return next;
  const std::string id = *next.grasped_object;
  next.grasped_object.reset();
  next.gripper_open = false;
  const auto* obj = scene.find_object(id);
  const auto& p = params.objects.at(id);
  next.object_poses[id] =
      settled_pose(next.object_poses[id], obj->half_extents * p.scale, scene);
  if (!intentional) next.violations.dropped = true;
  return next;
}

}  // namespace iker::sim
