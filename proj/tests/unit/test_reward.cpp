#include "iker/reward.hpp"

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "iker/rng.hpp"

using namespace iker;
using namespace iker::reward;
using geom::Pose;
using geom::Vec3;
using sim::SimState;

namespace {

RewardSpec simple_spec() {
  RewardSpec spec;
  spec.interaction_object = "box";
  spec.directive = Directive::push;
  spec.keypoint_locals = {{1, {0.05, 0, 0}}, {2, {-0.05, 0, 0}},
                          {3, {0, 0.035, 0}}, {4, {0, -0.035, 0}}};
  for (const auto& [label, local] : spec.keypoint_locals)
    spec.targets[label] = local + Vec3{0.2, 0.1, 0.0};
  return spec;
}

SimState state_with_box_at(const Vec3& pos) {
  SimState s;
  s.object_poses["box"] = Pose{pos, {}};
  s.gripper.position = {0.0, 0.0, 0.2};
  return s;
}

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("at-goal state latches the bonus") {
  RewardSpec spec = simple_spec();
  SimState prev = state_with_box_at({0.2, 0.1, 0.0});
  SimState cur = prev;
  auto [b, hold] = compute_reward(prev, cur, spec, spec.hold_steps - 1);
  CHECK(b.r_align == doctest::Approx(0.0));
  CHECK(b.r_bonus == doctest::Approx(1.0));
  CHECK(b.success_latched);
  CHECK(hold == spec.hold_steps);
}

TEST_CASE("static keypoints give zero direction reward") {
  RewardSpec spec = simple_spec();
  SimState prev = state_with_box_at({0.0, 0.0, 0.0});
  SimState cur = prev;
  auto [b, hold] = compute_reward(prev, cur, spec, 0);
  CHECK(b.r_dir == doctest::Approx(0.0));
  CHECK(hold == 0);
}

TEST_CASE("total equals an independent weighted-sum recomputation") {
  Rng rng(101);
  RewardSpec spec = simple_spec();
  for (int i = 0; i < 1000; ++i) {
    spec.weights.alpha_dist = rng.uniform(0, 2);
    spec.weights.alpha_dir = rng.uniform(0, 2);
    spec.weights.alpha_align = rng.uniform(0, 2);
    spec.weights.alpha_bonus = rng.uniform(0, 20);
    spec.weights.alpha_penalty = rng.uniform(0, 2);
    SimState prev = state_with_box_at(
        {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.2)});
    SimState cur = state_with_box_at(
        {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.2)});
    prev.gripper.position = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.1};
    cur.gripper.position = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.1};
    cur.violations.contact_impulse_sum = rng.uniform(0, 1);
    cur.violations.dropped = rng.uniform() < 0.2;
    int hold0 = static_cast<int>(rng.uniform_int(spec.hold_steps + 1));

    auto [b, hold] = compute_reward(prev, cur, spec, hold0);
    double expect = spec.weights.alpha_dist * b.r_dist +
                    spec.weights.alpha_dir * b.r_dir +
                    spec.weights.alpha_align * b.r_align +
                    spec.weights.alpha_bonus * b.r_bonus -
                    spec.weights.alpha_penalty * b.r_penalty;
    CHECK(std::abs(b.total - expect) <= 1e-9);
  }
}

TEST_CASE("translation invariance of align and direction terms") {
  Rng rng(202);
  RewardSpec spec = simple_spec();
  for (int i = 0; i < 500; ++i) {
    Vec3 shift{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    SimState prev = state_with_box_at(
        {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.2)});
    SimState cur = state_with_box_at(
        {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.2)});
    auto [b0, h0] = compute_reward(prev, cur, spec, 0);

    RewardSpec shifted = spec;
    for (auto& [label, t] : shifted.targets) t += shift;
    SimState prev_s = prev;
    SimState cur_s = cur;
    prev_s.object_poses.at("box").position += shift;
    cur_s.object_poses.at("box").position += shift;
    prev_s.gripper.position += shift;
    cur_s.gripper.position += shift;
    auto [b1, h1] = compute_reward(prev_s, cur_s, shifted, 0);

    CHECK(std::abs(b0.r_align - b1.r_align) <= 1e-9);
    CHECK(std::abs(b0.r_dir - b1.r_dir) <= 1e-9);
  }
}

TEST_CASE("align reward is nonpositive and zero only at the targets") {
  Rng rng(303);
  RewardSpec spec = simple_spec();
  for (int i = 0; i < 500; ++i) {
    SimState cur = state_with_box_at(
        {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.2)});
    auto [b, h] = compute_reward(cur, cur, spec, 0);
    CHECK(b.r_align <= 0.0);
  }
  SimState at_goal = state_with_box_at({0.2, 0.1, 0.0});
  auto [b, h] = compute_reward(at_goal, at_goal, spec, 0);
  CHECK(b.r_align == doctest::Approx(0.0));
}

TEST_CASE("moving a keypoint closer never decreases the align reward") {
  // single-keypoint spec so one keypoint moves while others stay fixed
  RewardSpec spec;
  spec.interaction_object = "box";
  spec.keypoint_locals = {{1, {0, 0, 0}}};
  spec.targets = {{1, {0.2, 0.0, 0.0}}};
  Rng rng(404);
  for (int i = 0; i < 500; ++i) {
    Vec3 far{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.3)};
    Vec3 toward = far + rng.uniform(0.0, 1.0) * (spec.targets.at(1) - far);
    SimState sfar = state_with_box_at(far);
    SimState snear = state_with_box_at(toward);
    auto [bfar, h0] = compute_reward(sfar, sfar, spec, 0);
    auto [bnear, h1] = compute_reward(snear, snear, spec, 0);
    CHECK(bnear.r_align >= bfar.r_align - 1e-12);
  }
}

TEST_CASE("bonus fires at most once and the latch holds") {
  RewardSpec spec = simple_spec();
  SimState at_goal = state_with_box_at({0.2, 0.1, 0.0});
  int hold = 0;
  double bonuses = 0.0;
  for (int t = 0; t < 50; ++t) {
    auto [b, h] = compute_reward(at_goal, at_goal, spec, hold);
    hold = h;
    bonuses += b.r_bonus;
    if (t >= spec.hold_steps - 1) CHECK(b.success_latched);
  }
  CHECK(bonuses == doctest::Approx(1.0));
  // wandering off after the latch does not rearm the bonus
  SimState away = state_with_box_at({-0.2, -0.2, 0.0});
  auto [b1, h1] = compute_reward(at_goal, away, spec, hold);
  CHECK(b1.r_bonus == 0.0);
  CHECK(b1.success_latched);
  auto [b2, h2] = compute_reward(away, at_goal, spec, h1);
  CHECK(b2.r_bonus == 0.0);
}

TEST_CASE("hold counter resets when the distance leaves the threshold") {
  RewardSpec spec = simple_spec();
  SimState at_goal = state_with_box_at({0.2, 0.1, 0.0});
  SimState away = state_with_box_at({-0.2, -0.2, 0.0});
  auto [b0, h0] = compute_reward(at_goal, at_goal, spec, 3);
  CHECK(h0 == 4);
  auto [b1, h1] = compute_reward(at_goal, away, spec, h0);
  CHECK(h1 == 0);
}

TEST_CASE("penalty counts movement, dropping, and force violations") {
  RewardSpec spec = simple_spec();
  SimState prev = state_with_box_at({0, 0, 0});
  SimState cur = prev;
  cur.gripper.position = prev.gripper.position + Vec3{0.02, 0.02, 0.02};
  cur.violations.dropped = true;
  cur.violations.contact_impulse_sum = 0.6;
  auto [b, h] = compute_reward(prev, cur, spec, 0);
  CHECK(b.r_penalty == doctest::Approx(3.0));

  SimState calm = prev;
  calm.gripper.position = prev.gripper.position + Vec3{0.01, 0.0, 0.0};
  auto [b2, h2] = compute_reward(prev, calm, spec, 0);
  CHECK(b2.r_penalty == doctest::Approx(0.0));
}

TEST_CASE("doubling a weight doubles its contribution") {
  RewardSpec spec = simple_spec();
  SimState prev = state_with_box_at({0.0, 0.0, 0.0});
  SimState cur = state_with_box_at({0.05, 0.02, 0.0});
  auto [b1, h1] = compute_reward(prev, cur, spec, 0);
  RewardSpec doubled = spec;
  doubled.weights.alpha_align = 2.0 * spec.weights.alpha_align;
  auto [b2, h2] = compute_reward(prev, cur, doubled, 0);
  double align_contrib_1 = spec.weights.alpha_align * b1.r_align;
  double align_contrib_2 = doubled.weights.alpha_align * b2.r_align;
  CHECK(std::abs(align_contrib_2 - 2.0 * align_contrib_1) <= 1e-12);
  CHECK(std::abs((b2.total - b1.total) - align_contrib_1) <= 1e-9);
}

TEST_CASE("check_success flips exactly at the threshold") {
  RewardSpec spec;
  spec.interaction_object = "box";
  spec.keypoint_locals = {{1, {0, 0, 0}}};
  spec.targets = {{1, {0, 0, 0}}};
  spec.success_threshold = 0.05;

  std::vector<SimState> history{state_with_box_at({0.049, 0, 0})};
  CHECK(check_success(history, spec));
  history = {state_with_box_at({0.051, 0, 0})};
  CHECK(!check_success(history, spec));
  history = {state_with_box_at({0, 0, 0})};
  CHECK(check_success(history, spec));
}

TEST_CASE("targets referencing pruned keypoints are rejected") {
  RewardSpec spec = simple_spec();
  spec.targets[99] = {0, 0, 0};
  SimState s = state_with_box_at({0, 0, 0});
  CHECK_THROWS_WITH_AS(compute_reward(s, s, spec, 0),
                       doctest::Contains("pruned keypoint"), std::runtime_error);
}

}  // TEST_SUITE
