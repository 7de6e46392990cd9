#include "iker/geometry.hpp"

namespace iker::geom {

Quat exp_map(const Vec3& rotvec) {
  double theta = rotvec.norm();
  double half = 0.5 * theta;
  double s;
  if (theta < 1e-8) {
    // sin(t/2)/t ~ 1/2 - t^2/48
    s = 0.5 - theta * theta / 48.0;
  } else {
    s = std::sin(half) / theta;
  }
  return Quat{std::cos(half), rotvec.x * s, rotvec.y * s, rotvec.z * s}
      .normalized();
}

Vec3 transform_point(const Pose& pose, const Vec3& local) {
  return pose.orientation.rotate(local) + pose.position;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.position = a.orientation.rotate(b.position) + a.position;
  out.orientation = (a.orientation * b.orientation).normalized();
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.orientation = p.orientation.conjugate();
  out.position = -out.orientation.rotate(p.position);
  return out;
}

Pose integrate_action(const Pose& pose, const ActionDelta& a) {
  Pose out;
  out.position = pose.position + a.dp;
  out.orientation = (exp_map(a.dr) * pose.orientation).normalized();
  return out;
}

double wrap_angle(double a) {
  constexpr double kPi = 3.14159265358979323846;
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace iker::geom
