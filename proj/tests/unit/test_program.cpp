#include "iker/program.hpp"

#include <cmath>

#include "doctest.h"
#include "iker/rng.hpp"
#include "test_support.hpp"

using namespace iker;
using namespace iker::dsl;
using geom::Vec3;

namespace {

scene::SceneModel program_scene() {
  scene::SceneModel scn;
  scn.workspace.min = {-0.4, -0.35, 0.0};
  scn.workspace.max = {0.4, 0.35, 0.4};
  scene::ObjectModel shoe;
  shoe.id = "obj_left_shoe";
  shoe.half_extents = {0.06, 0.03, 0.025};
  shoe.initial_pose.position = {-0.1, -0.1, 0.025};
  shoe.color_tag = "red";
  scene::ObjectModel other;
  other.id = "obj_right_shoe";
  other.half_extents = {0.06, 0.03, 0.025};
  other.initial_pose.position = {0.15, -0.1, 0.025};
  other.color_tag = "green";
  scn.objects = {shoe, other};
  scn.static_regions = {{"table", -0.4, -0.35, 0.4, 0.35, 0.0, false},
                        {"rack", -0.4, 0.2, 0.4, 0.35, 0.12, true}};
  generate_keypoints(scn, 0.1);
  return scn;
}

std::map<int, Vec3> keypoints_of(const scene::SceneModel& scn) {
  return scn.keypoint_positions(scn.initial_poses());
}

}  // namespace

TEST_SUITE("program") {

TEST_CASE("done-only program parses") {
  auto scn = program_scene();
  auto p = parse_program("done = true", scn);
  CHECK(p.done);
  CHECK(p.statements.empty());
  CHECK(!p.directive.has_value());
}

TEST_CASE("grasp program with one offset statement") {
  auto scn = program_scene();
  auto p = parse_program("grasp(obj_left_shoe)\ntarget[1] = kp(13) + vec(0, 0, 0.02)", scn);
  REQUIRE(p.statements.size() == 1);
  REQUIRE(p.directive.has_value());
  CHECK(p.directive->kind == Directive::grasp);
  CHECK(p.directive->object_id == "obj_left_shoe");
  // hand-checked AST: add(kp(13), vec(0,0,0.02))
  const Expr& e = *p.statements[0].expr;
  REQUIRE(e.kind == Expr::Kind::add);
  CHECK(e.lhs->kind == Expr::Kind::kp);
  CHECK(e.lhs->label == 13);
  CHECK(e.rhs->kind == Expr::Kind::vec);
  CHECK(e.rhs->value.z == doctest::Approx(0.02));
}

TEST_CASE("unknown keypoint labels are rejected") {
  auto scn = program_scene();
  CHECK_THROWS_WITH_AS(
      parse_program("push(obj_left_shoe)\ntarget[1] = kp(99)", scn),
      doctest::Contains("unknown keypoint label 99"), ParseError);
  CHECK_THROWS_WITH_AS(
      parse_program("push(obj_left_shoe)\ntarget[99] = kp(1)", scn),
      doctest::Contains("unknown keypoint label 99"), ParseError);
}

TEST_CASE("parse errors carry line and column") {
  auto scn = program_scene();
  try {
    parse_program("push(obj_left_shoe)\ntarget[1] = kp(", scn);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.column >= 15);
    CHECK(!e.reason.empty());
  }
}

TEST_CASE("missing directive on a not-done program is an error") {
  auto scn = program_scene();
  CHECK_THROWS_WITH_AS(parse_program("target[1] = kp(1)", scn),
                       doctest::Contains("missing grasp/push directive"), ParseError);
  CHECK_THROWS_WITH_AS(parse_program("# only a comment\n", scn),
                       doctest::Contains("no statements"), ParseError);
}

TEST_CASE("assigned labels must belong to the directive object") {
  auto scn = program_scene();
  // label 5 is on obj_right_shoe
  CHECK_THROWS_WITH_AS(parse_program("grasp(obj_left_shoe)\ntarget[5] = kp(5)", scn),
                       doctest::Contains("not a keypoint of"), ParseError);
}

TEST_CASE("type errors are rejected") {
  auto scn = program_scene();
  CHECK_THROWS_AS(parse_program("push(obj_left_shoe)\ntarget[1] = kp(1) + 0.5", scn),
                  ParseError);
  CHECK_THROWS_AS(parse_program("push(obj_left_shoe)\ntarget[1] = 2 + kp(1)", scn),
                  ParseError);
}

TEST_CASE("interpret identity and midpoint") {
  auto scn = program_scene();
  auto kps = keypoints_of(scn);
  auto p = parse_program("push(obj_left_shoe)\ntarget[1] = kp(1)", scn);
  auto result = interpret(p, kps);
  CHECK((result.targets.at(1) - kps.at(1)).norm() == doctest::Approx(0.0));

  std::map<int, Vec3> two{{13, {0, 0, 0}}, {14, {0.2, 0, 0}}, {1, {0, 0, 0}}};
  auto pm = parse_program("push(obj_left_shoe)\ntarget[1] = mid(kp(13), kp(14))", scn);
  auto rm = interpret(pm, two);
  CHECK(rm.targets.at(1).x == doctest::Approx(0.1));
  CHECK(rm.targets.at(1).y == doctest::Approx(0.0));
}

TEST_CASE("random programs match the independent oracle") {
  auto scn = program_scene();
  auto kps = keypoints_of(scn);
  Rng rng(515);
  for (int i = 0; i < 500; ++i) {
    KeypointProgram p = testsupport::random_program(scn, rng, 4);
    auto mine = interpret(p, kps);
    for (const auto& stmt : p.statements) {
      Vec3 oracle = testsupport::oracle_eval(*stmt.expr, kps);
      CHECK((mine.targets.at(stmt.label) - oracle).norm() == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("print-parse round trip is structurally identical") {
  auto scn = program_scene();
  Rng rng(616);
  for (int i = 0; i < 500; ++i) {
    KeypointProgram p = testsupport::random_program(scn, rng, 4);
    std::string text = print_program(p);
    KeypointProgram q = parse_program(text, scn);
    CHECK(structurally_equal(p, q));
  }
}

TEST_CASE("interpret never fails on validated programs") {
  auto scn = program_scene();
  auto kps = keypoints_of(scn);
  Rng rng(717);
  for (int i = 0; i < 500; ++i) {
    KeypointProgram p = testsupport::random_program(scn, rng, 4);
    CHECK_NOTHROW(interpret(p, kps));
  }
}

TEST_CASE("pose-baseline programs parse and reject unknown objects") {
  auto scn = program_scene();
  auto p = parse_program(
      "push(obj_left_shoe)\npose_target[obj_left_shoe] = pose(0.1, 0.2, 0.025, 0, 0, 1.5708)",
      scn);
  REQUIRE(p.pose_statements.size() == 1);
  CHECK(p.pose_statements[0].rpy.z == doctest::Approx(1.5708));
  CHECK(p.is_pose_program());

  CHECK_THROWS_WITH_AS(
      parse_program("push(obj_left_shoe)\npose_target[ghost] = pose(0,0,0,0,0,0)", scn),
      doctest::Contains("unknown object"), ParseError);
}

TEST_CASE("scalar multiplication and signed scalars") {
  auto scn = program_scene();
  auto kps = keypoints_of(scn);
  auto p = parse_program(
      "push(obj_left_shoe)\ntarget[1] = 0.5 * kp(1) + 0.5 * kp(2)\n"
      "target[2] = kp(2) - 2 * vec(0.01, 0, 0)\ntarget[3] = -1 * kp(3) + 2 * kp(3)",
      scn);
  auto r = interpret(p, kps);
  Vec3 expect_mid = 0.5 * (kps.at(1) + kps.at(2));
  CHECK((r.targets.at(1) - expect_mid).norm() == doctest::Approx(0.0));
  CHECK((r.targets.at(2) - (kps.at(2) - Vec3{0.02, 0, 0})).norm() == doctest::Approx(0.0));
  CHECK((r.targets.at(3) - kps.at(3)).norm() == doctest::Approx(0.0));
}

TEST_CASE("centroid and offset_along evaluate correctly") {
  auto scn = program_scene();
  std::map<int, Vec3> kps{{1, {0, 0, 0}}, {2, {0.1, 0, 0}}, {3, {0, 0.1, 0}},
                          {4, {0.1, 0.1, 0}}};
  auto p = parse_program(
      "push(obj_left_shoe)\ntarget[1] = centroid(1, 2, 3, 4)\n"
      "target[2] = offset_along(1, 2, 0.05)",
      scn);
  auto r = interpret(p, kps);
  CHECK(r.targets.at(1).x == doctest::Approx(0.05));
  CHECK(r.targets.at(1).y == doctest::Approx(0.05));
  CHECK(r.targets.at(2).x == doctest::Approx(0.05));
  CHECK(r.targets.at(2).y == doctest::Approx(0.0));
}

}  // TEST_SUITE
