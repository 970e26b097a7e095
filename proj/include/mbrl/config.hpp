#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbrl/env.hpp"
#include "mbrl/planner.hpp"
#include "mbrl/policy.hpp"
#include "mbrl/replay.hpp"
#include "mbrl/world_model.hpp"

namespace mbrl {

// Full run configuration. File format is INI-style sections of key = value
// pairs; command-line overrides address fields by dotted path, e.g.
// "policy.beta=2.0". Unknown keys are rejected by name.
struct TrainConfig {
  // [run]
  std::uint64_t seed = 0;
  long total_steps = 100000;
  long warmup_steps = 1000;
  double updates_per_step = 1.0;
  long eval_interval = 2000;
  int eval_episodes = 5;
  long checkpoint_interval = 0;  // 0: only a final checkpoint
  bool log_wall_clock = true;

  // [env]
  EnvName env = EnvName::tilt_walk;
  int episode_cap = 200;

  // [replay]
  std::size_t replay_capacity = 100000;
  ReturnMode return_mode = ReturnMode::undiscounted;

  // [model]
  int latent_dim = 32;
  int model_hidden_dim = 64;
  int model_depth = 2;
  int ensemble_size = 2;
  int num_bins = 65;
  double symlog_lo = -10.0;
  double symlog_hi = 10.0;
  HyperParams hp;

  // [policy]
  double beta = 1.0;
  std::string g_mode = "r_max";
  double alpha = 1e-4;
  std::string entropy_sign = "bonus";
  bool bc_enabled = true;
  int policy_hidden_dim = 64;
  int policy_depth = 2;
  double policy_lr = 3e-4;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  // [planner]
  bool plan_enabled = true;
  int plan_iters = 6;
  int plan_samples = 64;
  int plan_elites = 8;
  double plan_policy_frac = 0.375;
  double plan_temperature = 0.5;
  double plan_sigma_floor = 0.05;

  // Derived views for the modules.
  EnvSpec env_spec() const { return make_env_spec(env, episode_cap); }
  WorldModelConfig world_model_config() const;
  PolicyConfig policy_config() const;
  PlanConfig plan_config() const;
  GMode g_mode_enum() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainConfig default_config();

// Parses an INI-style file; an empty file yields the defaults. Throws
// ConfigError naming the offending key on unknown keys, type mismatches, and
// out-of-range values.
TrainConfig parse_config_file(const std::string& path);
TrainConfig parse_config_text(const std::string& text);

// Applies one "section.key=value" override. Throws ConfigError on unknown
// paths or bad values.
void apply_override(TrainConfig& cfg, const std::string& assignment);

// Range checks across all fields; throws ConfigError naming the key.
void validate_config(const TrainConfig& cfg);

// Canonical text form: every key in schema order. Parsing it back yields an
// identical config.
std::string serialize_config(const TrainConfig& cfg);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace mbrl
