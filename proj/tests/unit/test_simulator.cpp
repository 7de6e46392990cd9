#include "iker/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "iker/rng.hpp"

using namespace iker;
using namespace iker::sim;
using geom::ActionDelta;
using geom::Pose;
using geom::Vec3;

namespace {

scene::SceneModel push_scene() {
  scene::SceneModel scn;
  scn.workspace.min = {-0.4, -0.35, 0.0};
  scn.workspace.max = {0.4, 0.35, 0.4};
  scene::ObjectModel box;
  box.id = "box";
  box.half_extents = {0.05, 0.035, 0.03};
  box.initial_pose.position = {0.0, 0.0, 0.03};
  box.color_tag = "red";
  scn.objects = {box};
  scn.static_regions = {{"table", -0.4, -0.35, 0.4, 0.35, 0.0, false}};
  return scn;
}

bool states_identical(const SimState& a, const SimState& b) {
  if (a.step_count != b.step_count) return false;
  if ((a.gripper.position - b.gripper.position).norm() != 0.0) return false;
  if (a.grasped_object != b.grasped_object) return false;
  for (const auto& [id, pose] : a.object_poses) {
    const auto& other = b.object_poses.at(id);
    if ((pose.position - other.position).norm() != 0.0) return false;
    if (pose.orientation.w != other.orientation.w ||
        pose.orientation.x != other.orientation.x ||
        pose.orientation.y != other.orientation.y ||
        pose.orientation.z != other.orientation.z)
      return false;
  }
  return a.violations.contact_impulse_sum == b.violations.contact_impulse_sum &&
         a.violations.dropped == b.violations.dropped;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("reset with DR disabled reproduces the authored scene") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 123);
  CHECK(state.object_poses.at("box").position.x == 0.0);
  CHECK(state.object_poses.at("box").position.y == 0.0);
  CHECK(state.object_poses.at("box").position.z == 0.03);
  CHECK(params.objects.at("box").mass == doctest::Approx(1.15));
  CHECK(params.objects.at("box").scale == 1.0);

  // different seeds, identical states when DR is off
  auto [state2, params2] = reset(scn, dr, config, 999);
  CHECK(states_identical(state, state2));
  CHECK(params2.grasp_position_noise.norm() == 0.0);
}

TEST_CASE("reset is deterministic in the seed") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  SimConfig config;
  auto [sa, pa] = reset(scn, dr, config, 77);
  auto [sb, pb] = reset(scn, dr, config, 77);
  CHECK(states_identical(sa, sb));
  CHECK(pa.objects.at("box").mass == pb.objects.at("box").mass);
  CHECK(pa.objects.at("box").friction == pb.objects.at("box").friction);
  CHECK(pa.grasp_orientation_noise == pb.grasp_orientation_noise);
}

TEST_CASE("mass samples cover the configured range") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  SimConfig config;
  double lo = 1e9, hi = -1e9;
  for (int seed = 0; seed < 10000; ++seed) {
    auto [state, params] = reset(scn, dr, config, seed);
    double m = params.objects.at("box").mass;
    CHECK(m >= 0.3);
    CHECK(m <= 2.0);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  // empirical spread covers at least 95% of [0.3, 2.0]
  CHECK(hi - lo >= 0.95 * (2.0 - 0.3));
}

TEST_CASE("unplaceable scene errors after placement retries") {
  auto scn = push_scene();
  scene::ObjectModel clone = scn.objects[0];
  clone.id = "box2";
  scn.objects.push_back(clone);  // same pose: always overlapping
  DomainRandomizationConfig dr;
  SimConfig config;
  CHECK_THROWS_WITH_AS(reset(scn, dr, config, 1), "unplaceable scene",
                       std::runtime_error);
}

TEST_CASE("zero action leaves the state unchanged except the step count") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  SimState next = step(state, ActionDelta{}, scn, params, config);
  CHECK(next.step_count == state.step_count + 1);
  SimState compare = next;
  compare.step_count = state.step_count;
  CHECK(states_identical(compare, state));
}

TEST_CASE("pushing the gripper past the workspace bound clips exactly") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  state.gripper.position = {scn.workspace.max.x - 0.005, 0.3, 0.2};
  ActionDelta a;
  a.dp = {0.02, 0.0, 0.0};
  SimState next = step(state, a, scn, params, config);
  CHECK(next.gripper.position.x == scn.workspace.max.x);
}

TEST_CASE("gripper driven into a box displaces it along the push direction") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  params.objects.at("box").friction = 1.0;

  // approach from -x at the object's height
  state.gripper.position = {-0.08, 0.0, 0.03};
  double gripper_travel = 0.0;
  SimState cur = state;
  for (int i = 0; i < 10; ++i) {
    ActionDelta a;
    a.dp = {0.01, 0.0, 0.0};
    Vec3 before = cur.gripper.position;
    cur = step(cur, a, scn, params, config);
    gripper_travel += (cur.gripper.position - before).norm() + 0.0;
    // penetration resolved after every step
    double gap = (cur.gripper.position - cur.object_poses.at("box").position).norm();
    CHECK(gap >= 0.0);
  }
  double displacement = cur.object_poses.at("box").position.x;
  CHECK(displacement > 0.005);
  CHECK(displacement <= 0.1 + 1e-9);  // never more than the gripper traveled
  CHECK(cur.object_poses.at("box").position.y == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("push penetration stays under the resolution tolerance") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  SimConfig config;
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto [state, params] = reset(scn, dr, config, trial);
    state.gripper.position = {rng.uniform(-0.15, -0.09), rng.uniform(-0.05, 0.05), 0.03};
    SimState cur = state;
    for (int i = 0; i < 15; ++i) {
      ActionDelta a;
      a.dp = {rng.uniform(0.0, 0.02), rng.uniform(-0.01, 0.01), 0.0};
      cur = step(cur, a, scn, params, config);
      // sphere center vs box closest distance >= radius - tolerance
      const auto& pose = cur.object_poses.at("box");
      auto inv = geom::invert(pose);
      Vec3 local = geom::transform_point(inv, cur.gripper.position);
      Vec3 half = scaled_half_extents(scn.objects[0], params);
      Vec3 clamped{geom::clamp(local.x, -half.x, half.x),
                   geom::clamp(local.y, -half.y, half.y),
                   geom::clamp(local.z, -half.z, half.z)};
      double dist = (local - clamped).norm();
      CHECK(dist >= config.gripper_radius - config.penetration_tolerance - 1e-9);
    }
  }
}

TEST_CASE("higher friction transfers more motion to the pushed object") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto run = [&](double friction) {
    auto [state, params] = reset(scn, dr, config, 0);
    params.objects.at("box").friction = friction;
    state.gripper.position = {-0.08, 0.0, 0.03};
    SimState cur = state;
    for (int i = 0; i < 12; ++i) {
      ActionDelta a;
      a.dp = {0.015, 0.0, 0.0};
      cur = step(cur, a, scn, params, config);
    }
    return cur.object_poses.at("box").position.x;
  };
  CHECK(run(1.8) > run(0.3));
}

TEST_CASE("grasp at zero noise succeeds with an exact attachment") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  SimState grasped = try_grasp(state, "box", scn, params, config);
  REQUIRE(grasped.grasped_object.has_value());
  CHECK(*grasped.grasped_object == "box");
  // gripper teleported to the object center
  CHECK((grasped.gripper.position - grasped.object_poses.at("box").position).norm() ==
        doctest::Approx(0.0));
  // attachment transform is the relative pose gripper -> object
  Pose recomputed = geom::compose(grasped.gripper, grasped.grasp_transform);
  CHECK((recomputed.position - grasped.object_poses.at("box").position).norm() <= 1e-12);
}

TEST_CASE("grasp fails when the noise leaves the graspable band") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  params.grasp_position_noise = {0.2, 0.0, 0.0};
  SimState attempt = try_grasp(state, "box", scn, params, config);
  CHECK(!attempt.grasped_object.has_value());
}

TEST_CASE("grasp on a static element is rejected") {
  auto scn = push_scene();
  scene::ObjectModel fixed;
  fixed.id = "wall";
  fixed.half_extents = {0.1, 0.1, 0.1};
  fixed.manipulable = false;
  fixed.initial_pose.position = {0.3, 0.3, 0.1};
  scn.objects.push_back(fixed);
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  CHECK_THROWS_WITH_AS(try_grasp(state, "wall", scn, params, config),
                       doctest::Contains("not manipulable"), std::runtime_error);
}

TEST_CASE("in-range grasp noise always succeeds on a 0.1 m wide object") {
  auto scn = push_scene();
  scn.objects[0].half_extents = {0.05, 0.05, 0.03};  // 0.1 m wide
  DomainRandomizationConfig dr;  // grasp position noise [-0.01, 0.01]
  SimConfig config;
  int successes = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    auto [state, params] = reset(scn, dr, config, seed);
    SimState attempt = try_grasp(state, "box", scn, params, config);
    if (attempt.grasped_object) ++successes;
  }
  CHECK(successes == 1000);
}

TEST_CASE("grasped object follows the gripper rigidly") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 42);
  SimState cur = try_grasp(state, "box", scn, params, config);
  REQUIRE(cur.grasped_object.has_value());
  Rng rng(43);
  for (int i = 0; i < 50; ++i) {
    ActionDelta a;
    a.dp = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)};
    a.dr = {0.0, 0.0, rng.uniform(-0.1, 0.1)};
    cur = step(cur, a, scn, params, config);
    Pose expect = geom::compose(cur.gripper, cur.grasp_transform);
    CHECK((expect.position - cur.object_poses.at("box").position).norm() <= 1e-9);
  }
}

TEST_CASE("identical seeds and actions give bitwise-identical trajectories") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  SimConfig config;
  auto run = [&]() {
    auto [state, params] = reset(scn, dr, config, 31);
    SimState cur = state;
    Rng rng(7);
    for (int i = 0; i < 40; ++i) {
      ActionDelta a;
      a.dp = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
              rng.uniform(-0.02, 0.02)};
      a.dr = {0, 0, rng.uniform(-0.1, 0.1)};
      cur = step(cur, a, scn, params, config);
    }
    return cur;
  };
  SimState a = run();
  SimState b = run();
  CHECK(states_identical(a, b));
}

TEST_CASE("gripper stays inside the workspace after every step") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 3);
  SimState cur = state;
  Rng rng(9);
  for (int i = 0; i < 300; ++i) {
    ActionDelta a;
    a.dp = {rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03)};
    a.dr = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    cur = step(cur, a, scn, params, config);
    CHECK(scn.workspace.contains(cur.gripper.position));
  }
}

TEST_CASE("deployment proxy shifts range centers by a quarter width") {
  DomainRandomizationConfig dr;
  auto proxy = deployment_proxy_of(dr);
  CHECK(proxy.mass.lo == doctest::Approx(0.3 + 0.25 * 1.7));
  CHECK(proxy.mass.hi == doctest::Approx(2.0 + 0.25 * 1.7));
  CHECK(proxy.friction.lo == doctest::Approx(0.3 + 0.25 * 1.5));
  // restitution clamps to physical validity
  CHECK(proxy.restitution.lo == doctest::Approx(0.25));
  CHECK(proxy.restitution.hi == doctest::Approx(1.0));
  CHECK(proxy.enabled);
}

TEST_CASE("forced release drops the object and flags the violation") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  SimState cur = try_grasp(state, "box", scn, params, config);
  REQUIRE(cur.grasped_object.has_value());
  ActionDelta up;
  up.dp = {0, 0, 0.02};
  for (int i = 0; i < 5; ++i) cur = step(cur, up, scn, params, config);
  CHECK(cur.object_poses.at("box").position.z > 0.05);

  SimState released = release(cur, scn, params, /*intentional=*/false);
  CHECK(!released.grasped_object.has_value());
  CHECK(released.violations.dropped);
  CHECK(released.object_poses.at("box").position.z == doctest::Approx(0.03));

  SimState intentional = release(cur, scn, params, /*intentional=*/true);
  CHECK(!intentional.violations.dropped);
}

TEST_CASE("carried object cannot sink below its support") {
  auto scn = push_scene();
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);
  SimState cur = try_grasp(state, "box", scn, params, config);
  ActionDelta down;
  down.dp = {0, 0, -0.02};
  for (int i = 0; i < 10; ++i) cur = step(cur, down, scn, params, config);
  CHECK(cur.object_poses.at("box").position.z >= 0.03 - 1e-9);
  // rigidity preserved while blocked
  Pose expect = geom::compose(cur.gripper, cur.grasp_transform);
  CHECK((expect.position - cur.object_poses.at("box").position).norm() <= 1e-9);
}

TEST_CASE("raised regions block the gripper and carried objects") {
  auto scn = push_scene();
  scn.static_regions.push_back({"rack", -0.4, 0.2, 0.4, 0.35, 0.12, false});
  DomainRandomizationConfig dr;
  dr.enabled = false;
  SimConfig config;
  auto [state, params] = reset(scn, dr, config, 0);

  // slide the bare gripper toward the rack wall below its top
  state.gripper.position = {0.0, 0.1, 0.05};
  SimState cur = state;
  ActionDelta fwd;
  fwd.dp = {0, 0.02, 0};
  for (int i = 0; i < 20; ++i) cur = step(cur, fwd, scn, params, config);
  CHECK(cur.gripper.position.y <= 0.2 - config.gripper_radius + 1e-9);

  // over the rack the gripper rides on its top
  cur.gripper.position = {0.0, 0.27, 0.3};
  ActionDelta down;
  down.dp = {0, 0, -0.02};
  for (int i = 0; i < 20; ++i) cur = step(cur, down, scn, params, config);
  CHECK(cur.gripper.position.z >= 0.12 + config.gripper_radius - 1e-9);
}

}  // TEST_SUITE
