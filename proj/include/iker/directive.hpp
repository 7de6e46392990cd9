#pragma once

namespace iker {

// What the policy does to the interaction object.
enum class Directive { grasp, push };

inline const char* directive_name(Directive d) {
  return d == Directive::grasp ? "grasp" : "push";
}

}  // namespace iker
