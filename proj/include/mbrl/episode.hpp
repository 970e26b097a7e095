#pragma once

#include <vector>

#include "mbrl/types.hpp"

namespace mbrl {

// One trajectory: L transitions, L+1 observations, plus the whole-trajectory
// return attached once the episode is complete.
struct Episode {
  std::vector<Vec> observations;
  std::vector<Vec> actions;
  std::vector<double> rewards;
  std::vector<double> upright;  // gating component per step, in [0, 1]
  double trajectory_return = 0.0;
  bool complete = false;
  bool terminated = false;  // ended by failure, as opposed to the step cap

  int length() const { return static_cast<int>(rewards.size()); }
};

}  // namespace mbrl
