#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iker/directive.hpp"
#include "iker/geometry.hpp"
#include "iker/scene.hpp"

// The restricted keypoint-program language: task specifications are small
// programs that map current keypoints to target keypoints plus an
// interaction directive and a done flag. One statement per line, '#'
// comments. Example:
//
//   grasp(left_shoe)
//   target[5] = kp(13) + vec(0, 0, 0.02)
//   target[6] = mid(kp(13), kp(14))
//
// The pose-baseline variant assigns whole-object goal poses instead:
//
//   push(book)
//   pose_target[book] = pose(0.1, 0.2, 0.03, 0, 0, 1.57)

namespace iker::dsl {

using geom::Vec3;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { kp, vec, add, sub, scale, mid, centroid, offset_along };
  Kind kind = Kind::vec;
  int label = 0;            // kp
  Vec3 value;               // vec
  double scalar = 0.0;      // scale factor / offset_along distance
  int label_a = 0;          // offset_along
  int label_b = 0;
  std::vector<int> labels;  // centroid
  ExprPtr lhs;
  ExprPtr rhs;
};

bool structurally_equal(const Expr& a, const Expr& b);

struct Assignment {
  int label = 0;
  ExprPtr expr;
};

// Pose-baseline goal: xyz position plus roll-pitch-yaw, world frame.
struct PoseTarget {
  std::string object_id;
  Vec3 position;
  Vec3 rpy;
};

struct DirectiveStmt {
  Directive kind = Directive::push;
  std::string object_id;
};

struct KeypointProgram {
  std::vector<Assignment> statements;
  std::vector<PoseTarget> pose_statements;
  std::optional<DirectiveStmt> directive;
  bool done = false;
  std::string raw_text;

  bool is_pose_program() const { return !pose_statements.empty(); }
};

bool structurally_equal(const KeypointProgram& a, const KeypointProgram& b);

struct ParseError : std::runtime_error {
  ParseError(int line_, int column_, const std::string& reason_)
      : std::runtime_error("line " + std::to_string(line_) + ", col " +
                           std::to_string(column_) + ": " + reason_),
        line(line_),
        column(column_),
        reason(reason_) {}
  int line;
  int column;
  std::string reason;
};

// Parse and validate against a scene: referenced labels must exist among
// the scene's (pruned) keypoints, assigned labels must belong to the
// directive's object, and a not-done program needs a directive plus at
// least one statement. Throws ParseError.
KeypointProgram parse_program(const std::string& text, const scene::SceneModel& scn);

struct InterpretResult {
  std::map<int, Vec3> targets;
  bool done = false;
  std::optional<DirectiveStmt> directive;
};

// Pure evaluation over current keypoint positions; total on validated
// programs. Pose-baseline programs are converted by the planner module.
InterpretResult interpret(const KeypointProgram& program,
                          const std::map<int, Vec3>& keypoints);

// Canonical text form; parse(print(p)) is structurally equal to p.
std::string print_program(const KeypointProgram& program);

}  // namespace iker::dsl
