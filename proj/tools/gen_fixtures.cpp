// Regenerates the committed benchmark fixtures (scenes, instructions, and
// per-condition programs). Output is deterministic; rerunning after editing
// the task definitions refreshes fixtures/ in place.

#include <cstdio>
#include <string>

#include "iker/harness.hpp"

int main(int argc, char** argv) {
  std::string root = argc > 1 ? argv[1] : "fixtures";
  using namespace iker::bench;

  int written = 0;
  for (TaskId task : {TaskId::place, TaskId::push_pair, TaskId::push_edge, TaskId::reorient}) {
    for (int k = 0; k < kConfigsPerTask; ++k) {
      write_task_fixture(make_task_config(task, k), task_fixture_dir(root, task, k));
      ++written;
    }
  }
  for (int k = 0; k < kConfigsPerTask; ++k) {
    write_scenario_fixture(make_chaining_config(k), chaining_fixture_dir(root, k));
    ++written;
  }
  write_scenario_fixture(make_disturbance_config(), disturbance_fixture_dir(root));
  ++written;

  std::printf("wrote %d fixture directories under %s\n", written, root.c_str());
  return 0;
}
