#pragma once

#include <optional>
#include <string>

#include "mbrl/adam.hpp"
#include "mbrl/config.hpp"
#include "mbrl/env.hpp"
#include "mbrl/plan_model.hpp"
#include "mbrl/planner.hpp"
#include "mbrl/policy.hpp"
#include "mbrl/replay.hpp"
#include "mbrl/world_model.hpp"

namespace mbrl {

// One row of the training log, emitted at every evaluation event. Loss and
// omega fields are means over the updates since the previous event.
struct MetricsRecord {
  long step = 0;
  double l_d = 0.0;
  double l_r = 0.0;
  double l_q = 0.0;
  double policy_loss = 0.0;
  double omega_mean = 0.0;
  double r_max = 0.0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double upright_mean = 0.0;
  double wall_clock_update_s = 0.0;

  std::string to_json_line() const;
  static MetricsRecord from_json_line(const std::string& line);
};

struct EvalStats {
  double return_mean = 0.0;
  double return_std = 0.0;  // population
  UprightSummary upright;   // pooled over all eval steps
  std::vector<Episode> episodes;
};

struct RunSummary {
  long steps_to_target = -1;  // -1: not reached
  double final_eval_return_mean = 0.0;
  double final_eval_return_std = 0.0;
  double final_r_max = 0.0;
  long total_updates = 0;
  long total_env_steps = 0;
  double update_seconds_total = 0.0;

  std::string to_json() const;
};

// The online loop: act (plan or sample), store, update world model and policy
// every environment step, evaluate periodically. Fully determined by
// (config, seed, build); all randomness flows through owned streams that
// checkpoints capture.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  // One environment step plus any due update rounds. Returns a metrics record
  // when this step is an evaluation event.
  std::optional<MetricsRecord> train_step();

  // Deterministic-mode planning (mean action) on eval-only seed streams,
  // disjoint from training randomness.
  EvalStats evaluate(int episodes, std::uint64_t seed) const;

  // Runs to total_steps, writing metrics.jsonl, checkpoints, and summary.json
  // under out_dir. Throws if out_dir is not writable.
  RunSummary run(const std::string& out_dir);

  void save_checkpoint(const std::string& path) const;
  // Rebuilds a trainer from a checkpoint. If expected is non-null its config
  // hash must match the stored one unless force is set.
  static Trainer load_checkpoint(const std::string& path,
                                 const TrainConfig* expected = nullptr,
                                 bool force = false);

  std::uint64_t params_hash() const;
  std::uint64_t state_hash() const;  // everything except wall-clock counters

  const TrainConfig& config() const { return cfg_; }
  long env_steps() const { return env_step_; }
  long total_updates() const { return total_updates_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const WorldModel& world_model() const { return wm_; }
  const Policy& policy() const { return pol_; }
  long steps_to_target() const { return steps_to_target_; }
  std::uint64_t eval_seed_for(long step) const;

 private:
  Trainer() = default;  // used by load_checkpoint
  void init_episode();
  void update_round();
  MetricsRecord make_record();
  void serialize(std::ostream& os, bool include_timing) const;
  void deserialize(std::istream& is);

  TrainConfig cfg_;
  EnvSpec spec_;
  EnvState env_;
  ReplayBuffer buffer_;
  WorldModel wm_;
  Policy pol_;
  AdamState wm_opt_;
  AdamState pol_opt_;
  PlanDistribution plan_dist_;
  bool episode_open_ = false;

  Rng env_stream_{0};      // episode seeds
  Rng warmup_stream_{0};   // uniform warmup actions
  Rng plan_stream_{0};     // planner noise + terminal samples
  Rng update_stream_{0};   // batch sampling, TD samples, reparam noise

  long env_step_ = 0;
  long total_updates_ = 0;
  double update_credit_ = 0.0;
  long steps_to_target_ = -1;

  // accumulators since the last metrics record
  double acc_l_d_ = 0.0, acc_l_r_ = 0.0, acc_l_q_ = 0.0;
  double acc_policy_loss_ = 0.0, acc_omega_ = 0.0;
  long acc_updates_ = 0;
  double acc_update_seconds_ = 0.0;
  double update_seconds_total_ = 0.0;
};

}  // namespace mbrl
