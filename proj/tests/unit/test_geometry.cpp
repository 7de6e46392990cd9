#include "iker/geometry.hpp"

#include <array>
#include <cmath>

#include "doctest.h"
#include "iker/rng.hpp"

using namespace iker;
using namespace iker::geom;

namespace {

// Independent oracle: 4x4 homogeneous-matrix transform built from scratch
// (quaternion -> rotation matrix -> matrix-vector product). Written before
// the implementation under test and kept free of it.
struct Mat4 {
  std::array<std::array<double, 4>, 4> m{};
};

Mat4 pose_to_matrix(const Pose& p) {
  const Quat& q = p.orientation;
  double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat4 out;
  out.m[0] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
              p.position.x};
  out.m[1] = {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
              p.position.y};
  out.m[2] = {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
              p.position.z};
  out.m[3] = {0, 0, 0, 1};
  return out;
}

Vec3 matrix_apply(const Mat4& m, const Vec3& v) {
  std::array<double, 4> in{v.x, v.y, v.z, 1.0};
  std::array<double, 4> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[r] += m.m[r][c] * in[c];
  return {out[0], out[1], out[2]};
}

Pose random_pose(Rng& rng) {
  Pose p;
  p.position = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  p.orientation =
      Quat{rng.normal(), rng.normal(), rng.normal(), rng.normal()}.normalized();
  return p;
}

Vec3 random_point(Rng& rng) {
  return {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
}

bool approx_vec(const Vec3& a, const Vec3& b, double tol) {
  return (a - b).norm() <= tol;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("transform_point identity and quarter turn") {
  Pose identity;
  CHECK(approx_vec(transform_point(identity, {0.1, 0, 0}), {0.1, 0, 0}, 0.0));

  Pose quarter;
  quarter.orientation = Quat::from_yaw(M_PI / 2.0);
  CHECK(approx_vec(transform_point(quarter, {1, 0, 0}), {0, 1, 0}, 1e-9));
}

TEST_CASE("transform_point matches homogeneous-matrix oracle") {
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    Pose p = random_pose(rng);
    Vec3 v = random_point(rng);
    Vec3 expected = matrix_apply(pose_to_matrix(p), v);
    CHECK(approx_vec(transform_point(p, v), expected, 1e-9));
  }
}

TEST_CASE("transform_point is an isometry") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Pose p = random_pose(rng);
    Vec3 a = random_point(rng);
    Vec3 b = random_point(rng);
    double before = (a - b).norm();
    double after = (transform_point(p, a) - transform_point(p, b)).norm();
    CHECK(std::abs(before - after) <= 1e-9);
  }
}

TEST_CASE("compose identity, inverse, associativity, consistency") {
  Rng rng(3);
  Pose p = random_pose(rng);
  Pose id;

  Pose left = compose(id, p);
  CHECK(approx_vec(left.position, p.position, 1e-12));

  Pose round = compose(p, invert(p));
  CHECK(approx_vec(round.position, {0, 0, 0}, 1e-8));
  CHECK(std::abs(std::abs(round.orientation.w) - 1.0) <= 1e-8);

  for (int i = 0; i < 100; ++i) {
    Pose a = random_pose(rng);
    Pose b = random_pose(rng);
    Pose c = random_pose(rng);
    Vec3 v = random_point(rng);
    Pose ab_c = compose(compose(a, b), c);
    Pose a_bc = compose(a, compose(b, c));
    CHECK(approx_vec(transform_point(ab_c, v), transform_point(a_bc, v), 1e-8));
    // compose contract against nested transform
    CHECK(approx_vec(transform_point(compose(a, b), v),
                     transform_point(a, transform_point(b, v)), 1e-8));
  }
}

TEST_CASE("integrate_action basics") {
  Pose p;
  p.position = {0.1, 0.2, 0.3};
  ActionDelta zero;
  Pose same = integrate_action(p, zero);
  CHECK(approx_vec(same.position, p.position, 0.0));
  CHECK(same.orientation.w == doctest::Approx(1.0).epsilon(1e-12));

  ActionDelta turn;
  turn.dr = {0, 0, M_PI / 2.0};
  Pose turned = integrate_action(Pose{}, turn);
  Quat expected = Quat::from_yaw(M_PI / 2.0);
  CHECK(std::abs(turned.orientation.w - expected.w) <= 1e-9);
  CHECK(std::abs(turned.orientation.z - expected.z) <= 1e-9);
}

TEST_CASE("integrate_action sequence equals composed exp-map poses") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<ActionDelta, 10> actions;
    for (auto& a : actions) {
      a.dp = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
              rng.uniform(-0.02, 0.02)};
      a.dr = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    }
    Pose integrated;
    for (const auto& a : actions) integrated = integrate_action(integrated, a);

    // oracle: left-compose the world-frame exp-map poses; translations add
    Pose composed;
    for (const auto& a : actions) {
      Pose delta;
      delta.orientation = exp_map(a.dr);
      composed.orientation = (delta.orientation * composed.orientation).normalized();
      composed.position += a.dp;
    }
    CHECK(approx_vec(integrated.position, composed.position, 1e-12));
    Vec3 probe{0.3, -0.2, 0.5};
    CHECK(approx_vec(integrated.orientation.rotate(probe),
                     composed.orientation.rotate(probe), 1e-9));
  }
}

TEST_CASE("integrating the inverse action restores the pose") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    Pose p = random_pose(rng);
    ActionDelta a;
    a.dp = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)};
    a.dr = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    ActionDelta inv;
    inv.dp = -a.dp;
    inv.dr = -a.dr;
    Pose back = integrate_action(integrate_action(p, a), inv);
    CHECK(approx_vec(back.position, p.position, 1e-7));
    Vec3 probe{1, 2, 3};
    CHECK(approx_vec(back.orientation.rotate(probe), p.orientation.rotate(probe), 1e-7));
  }
}

TEST_CASE("quaternion norm stays unit over 10000 integrations") {
  Rng rng(17);
  Pose p;
  for (int i = 0; i < 10000; ++i) {
    ActionDelta a;
    a.dr = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    p = integrate_action(p, a);
  }
  CHECK(std::abs(p.orientation.norm() - 1.0) <= 1e-6);
}

}  // TEST_SUITE
