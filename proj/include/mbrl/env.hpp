#pragma once

#include <cstdint>
#include <string>

#include "mbrl/episode.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

// Analytic toy environments with one shared structural premise: reward is
// multiplicatively gated by a [0,1] "stay in the narrow feasible region"
// factor, and leaving that region is an absorbing failure.
//
// tilt_* family: a destabilizing tilt dynamic with actuation authority lost
// past a critical angle, plus a velocity-tracking task reward.
// corridor: a point mass driving through a periodic obstacle field where
// obstacle contact terminates the episode.
enum class EnvName { tilt_stand, tilt_walk, tilt_run, corridor };

EnvName env_name_from_string(const std::string& s);  // throws on unknown name
std::string to_string(EnvName name);

struct EnvSpec {
  EnvName name = EnvName::tilt_walk;
  int obs_dim = 4;
  int act_dim = 2;
  int episode_cap = 200;
  double r_target = 170.0;
  double target_velocity = 1.0;  // tilt family only
};

EnvSpec make_env_spec(EnvName name, int episode_cap = 200);

struct EnvState {
  EnvSpec spec;
  Vec observation;
  Vec internal;  // tilt: [theta, theta_dot, x, x_dot]; corridor: [x, y, x_dot, y_dot]
  int step_index = 0;
  bool terminated = false;
};

struct StepResult {
  Vec observation;
  double reward = 0.0;
  double upright = 0.0;  // the multiplicative gate, in [0, 1]
  bool terminated = false;
  bool truncated = false;
};

// Deterministic in (spec, seed). Initial tilt (or lateral offset) uniform in
// [-0.05, 0.05], velocities zero.
EnvState env_reset(const EnvSpec& spec, std::uint64_t seed);

// Advances the state in place. Pure function of (state, action); action
// components are clamped to [-1, 1]. Throws std::logic_error if the state is
// already terminated.
StepResult env_step(EnvState& state, const Vec& action);

// Dynamics constants, fixed once and exercised by the calibration tests.
namespace env_constants {
inline constexpr double dt = 0.05;
inline constexpr double g_destab = 2.5;
inline constexpr double balance_gain = 3.0;   // a0
inline constexpr double drive_gain = 5.0;     // a1
inline constexpr double drag = 0.5;
inline constexpr double theta_crit = 0.6;     // actuation authority lost beyond this
inline constexpr double corridor_accel = 4.0;
inline constexpr double corridor_drag = 0.5;
inline constexpr double corridor_period = 10.0;
inline constexpr double obstacle_radius = 0.35;
}  // namespace env_constants

struct UprightSummary {
  double mean = 0.0;
  double q10 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q90 = 0.0;
};

// Order statistics of the per-step gate component. Quantiles use the lower
// order statistic at index floor(q * (n - 1)). Throws on empty episodes.
UprightSummary upright_distribution(const Episode& episode);

}  // namespace mbrl
