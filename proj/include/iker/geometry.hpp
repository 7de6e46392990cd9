#pragma once

#include <cmath>

// Rigid-body math shared by every other module: 3-vectors, unit
// quaternions, poses, and the per-step action delta of the end effector.

namespace iker::geom {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double squared_norm() const { return dot(*this); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Unit quaternion, scalar-first (w, x, y, z). Constructors and
// normalization keep the norm within 1e-9 of 1.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    double n = norm();
    if (n <= 0.0) return Quat{};
    return {w / n, x / n, y / n, z / n};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  // Hamilton product.
  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  // Rotate a vector: q v q*.
  Vec3 rotate(const Vec3& v) const {
    Vec3 u{x, y, z};
    Vec3 t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }

  // Yaw of the rotated body x-axis projected to the horizontal plane.
  double yaw() const {
    Vec3 bx = rotate({1.0, 0.0, 0.0});
    return std::atan2(bx.y, bx.x);
  }

  static Quat from_yaw(double yaw) {
    return {std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)};
  }

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    Vec3 a = axis.normalized();
    double s = std::sin(0.5 * angle);
    return Quat{std::cos(0.5 * angle), a.x * s, a.y * s, a.z * s}.normalized();
  }
};

// Exponential map from an axis-angle rotation vector to a unit quaternion.
// Series expansion near zero keeps the map smooth for small steps.
Quat exp_map(const Vec3& rotvec);

struct Pose {
  Vec3 position;
  Quat orientation;

  static Pose identity() { return {}; }
};

// Per-control-step end-effector delta: translation (m) and a world-frame
// axis-angle rotation vector (rad).
struct ActionDelta {
  Vec3 dp;
  Vec3 dr;
};

// R(q) * local + p
Vec3 transform_point(const Pose& pose, const Vec3& local);

// a then b in local-to-world order: transform(compose(a,b), x) ==
// transform(a, transform(b, x)).
Pose compose(const Pose& a, const Pose& b);

Pose invert(const Pose& p);

// position += dp; orientation = exp(dr) * orientation, renormalized.
// Callers clip the action to per-step bounds first.
Pose integrate_action(const Pose& pose, const ActionDelta& a);

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace iker::geom
