#pragma once

#include "mbrl/policy.hpp"
#include "mbrl/world_model.hpp"

namespace mbrl {

// Planner view over the learned world model and policy prior. Terminal value
// is the online ensemble min at a policy-sampled action.
struct AgentPlanModel {
  const WorldModel& wm;
  const Policy& policy;

  Mat dynamics_step(const Mat& z, const Mat& a) const { return wm.dynamics_step(z, a); }
  RowVec reward_decode(const Mat& z, const Mat& a) const { return wm.reward_decode(z, a); }
  RowVec terminal_value(const Mat& z, Rng& rng) const {
    Mat a = policy.sample_actions(z, rng);
    return wm.value_decode_min(z, a);
  }
  Mat sample_policy_actions(const Mat& z, Rng& rng) const {
    return policy.sample_actions(z, rng);
  }
};

}  // namespace mbrl
