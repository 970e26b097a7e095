#include "mbrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mbrl/rng.hpp"

namespace mbrl {

namespace {

using namespace env_constants;

// Obstacle centers within one corridor period; the field repeats every
// `corridor_period` along x. The band |y| > 0.8 stays obstacle-free so a
// wall-hugging lane exists.
struct Obstacle {
  double x, y;
};
constexpr Obstacle kObstacles[] = {{2.0, 0.35}, {5.0, -0.45}, {8.0, 0.1}};

double wrap_period(double x) {
  double m = std::fmod(x, corridor_period);
  return m < 0.0 ? m + corridor_period : m;
}

// Distance from (x, y) to the obstacle surface, scanning the current and the
// two adjacent periods.
double obstacle_surface_distance(double x, double y, const Obstacle& ob) {
  double best = std::numeric_limits<double>::infinity();
  double xm = wrap_period(x);
  for (int k = -1; k <= 1; ++k) {
    double dx = xm - (ob.x + k * corridor_period);
    double dy = y - ob.y;
    best = std::min(best, std::hypot(dx, dy) - obstacle_radius);
  }
  return best;
}

Vec tilt_observation(const Vec& s) {
  Vec obs(4);
  obs << std::sin(s[0]), std::cos(s[0]), s[1], s[3];
  return obs;
}

Vec corridor_observation(const Vec& s) {
  Vec obs(7);
  double d[3];
  for (int i = 0; i < 3; ++i) d[i] = obstacle_surface_distance(s[0], s[1], kObstacles[i]);
  std::sort(d, d + 3);
  obs << wrap_period(s[0]), s[1], s[2], s[3], d[0], d[1], d[2];
  return obs;
}

}  // namespace

EnvName env_name_from_string(const std::string& s) {
  if (s == "tilt_stand") return EnvName::tilt_stand;
  if (s == "tilt_walk") return EnvName::tilt_walk;
  if (s == "tilt_run") return EnvName::tilt_run;
  if (s == "corridor") return EnvName::corridor;
  throw std::invalid_argument("unknown environment name: " + s);
}

std::string to_string(EnvName name) {
  switch (name) {
    case EnvName::tilt_stand: return "tilt_stand";
    case EnvName::tilt_walk: return "tilt_walk";
    case EnvName::tilt_run: return "tilt_run";
    case EnvName::corridor: return "corridor";
  }
  return "?";
}

EnvSpec make_env_spec(EnvName name, int episode_cap) {
  EnvSpec spec;
  spec.name = name;
  spec.episode_cap = episode_cap;
  switch (name) {
    case EnvName::tilt_stand:
      spec.obs_dim = 4;
      spec.target_velocity = 0.0;
      spec.r_target = 0.85 * episode_cap;
      break;
    case EnvName::tilt_walk:
      spec.obs_dim = 4;
      spec.target_velocity = 1.0;
      spec.r_target = 0.85 * episode_cap;
      break;
    case EnvName::tilt_run:
      spec.obs_dim = 4;
      spec.target_velocity = 5.0;
      spec.r_target = 0.6 * episode_cap;
      break;
    case EnvName::corridor:
      spec.obs_dim = 7;
      spec.target_velocity = 1.0;
      spec.r_target = 0.6 * episode_cap;
      break;
  }
  spec.act_dim = 2;
  return spec;
}

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x656e76);  // dedicated reset stream
  EnvState st;
  st.spec = spec;
  st.step_index = 0;
  st.terminated = false;
  st.internal = Vec::Zero(4);
  if (spec.name == EnvName::corridor) {
    st.internal[1] = rng.uniform(-0.05, 0.05);  // lateral offset
    st.observation = corridor_observation(st.internal);
  } else {
    st.internal[0] = rng.uniform(-0.05, 0.05);  // initial tilt
    st.observation = tilt_observation(st.internal);
  }
  return st;
}

StepResult env_step(EnvState& state, const Vec& action) {
  if (state.terminated)
    throw std::logic_error("env_step: stepping a terminated state");
  if (action.size() != state.spec.act_dim)
    throw std::invalid_argument("env_step: action dimension mismatch");
  Vec u = action.cwiseMax(-1.0).cwiseMin(1.0);

  StepResult out;
  Vec& s = state.internal;

  if (state.spec.name == EnvName::corridor) {
    double& x = s[0];
    double& y = s[1];
    double& xd = s[2];
    double& yd = s[3];
    xd += dt * (corridor_accel * u[0] - corridor_drag * xd);
    x += dt * xd;
    yd += dt * (corridor_accel * u[1] - corridor_drag * yd);
    y += dt * yd;
    if (y > 1.0) { y = 1.0; yd = 0.0; }    // walls are safe: slide along them
    if (y < -1.0) { y = -1.0; yd = 0.0; }

    bool contact = false;
    for (const Obstacle& ob : kObstacles)
      contact = contact || obstacle_surface_distance(x, y, ob) <= 0.0;

    state.step_index += 1;
    out.terminated = contact;
    out.truncated = !contact && state.step_index >= state.spec.episode_cap;
    out.upright = contact ? 0.0 : 1.0;  // the gate factor
    double dv = xd - state.spec.target_velocity;
    out.reward = out.upright * std::exp(-dv * dv);
    out.observation = corridor_observation(s);
  } else {
    double& theta = s[0];
    double& theta_dot = s[1];
    double& x = s[2];
    double& x_dot = s[3];
    double kappa = std::abs(theta) < theta_crit ? 1.0 : 0.0;
    theta_dot += dt * (g_destab * std::sin(theta) + balance_gain * u[0] * kappa);
    theta += dt * theta_dot;
    x_dot += dt * (drive_gain * u[1] * std::cos(theta) - drag * x_dot);
    x += dt * x_dot;

    state.step_index += 1;
    out.terminated = std::abs(theta) >= std::numbers::pi / 2.0;
    out.truncated = !out.terminated && state.step_index >= state.spec.episode_cap;
    double c = std::max(0.0, std::cos(2.0 * theta));
    out.upright = c * c;
    double dv = x_dot - state.spec.target_velocity;
    out.reward = out.upright * std::exp(-dv * dv);
    out.observation = tilt_observation(s);
  }

  state.terminated = out.terminated;
  state.observation = out.observation;
  return out;
}

UprightSummary upright_distribution(const Episode& episode) {
  if (episode.upright.empty())
    throw std::invalid_argument("upright_distribution: empty episode");
  std::vector<double> v = episode.upright;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    auto idx = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
    return v[idx];
  };
  UprightSummary s;
  s.mean = 0.0;
  for (double u : v) s.mean += u;
  s.mean /= static_cast<double>(v.size());
  s.q10 = q(0.10);
  s.q25 = q(0.25);
  s.q50 = q(0.50);
  s.q75 = q(0.75);
  s.q90 = q(0.90);
  return s;
}

}  // namespace mbrl
