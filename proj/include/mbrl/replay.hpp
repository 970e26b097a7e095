#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <ostream>
#include <vector>

#include "mbrl/episode.hpp"
#include "mbrl/rng.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

enum class ReturnMode { undiscounted, discounted };

// Whole-trajectory return of a reward sequence. Throws on empty input.
double episode_return(const std::vector<double>& rewards, ReturnMode mode,
                      double gamma = 0.99);

// One sampled training batch: column b of every matrix belongs to segment b.
struct Batch {
  std::vector<Mat> obs;     // horizon+1 entries, each obs_dim x B
  std::vector<Mat> act;     // horizon entries, each act_dim x B
  Mat rew;                  // horizon x B
  Mat done;                 // horizon x B; 1 where the transition terminates the episode
  RowVec traj_return;       // 1 x B, the source episode's return
  int horizon = 0;
  int batch_size = 0;
};

// Episode-structured buffer. Only complete episodes are sampleable and count
// toward r_max; capacity is in stored steps and eviction drops whole episodes
// oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_steps = 100000,
                        ReturnMode mode = ReturnMode::undiscounted,
                        double gamma = 0.99);

  void begin_episode(const Vec& first_obs);
  void append_step(const Vec& action, double reward, double upright,
                   const Vec& next_obs);
  // Freezes the open episode's return, makes it sampleable, updates r_max,
  // and evicts if over capacity. Throws on an empty open episode.
  void finish_episode(bool terminated);

  bool has_open_episode() const { return open_.has_value(); }
  const Episode* open_episode() const { return open_ ? &*open_ : nullptr; }

  // Max whole-trajectory return over stored complete episodes; -inf when none.
  double r_max() const { return r_max_; }
  std::size_t total_steps() const { return total_steps_; }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Episode>& episodes() const { return episodes_; }
  std::size_t num_complete() const { return episodes_.size(); }

  // Uniform over all valid (episode, start) pairs; every step of a segment
  // carries its episode's return. Returns nullopt when no episode of length
  // >= horizon exists yet (retryable).
  std::optional<Batch> sample(int batch_size, int horizon, Rng& rng) const;

  // Line-delimited records (id, length, return, upright_mean) for offline
  // analysis.
  void dump_episodes(std::ostream& os) const;

  // Restore support for checkpointing.
  void restore(std::deque<Episode> episodes, std::optional<Episode> open);

 private:
  void evict_if_needed();
  void recompute_r_max();

  std::size_t capacity_;
  ReturnMode mode_;
  double gamma_;
  std::deque<Episode> episodes_;
  std::optional<Episode> open_;
  double r_max_;
  std::size_t total_steps_ = 0;
  std::size_t next_episode_id_ = 0;
  std::size_t first_episode_id_ = 0;
};

void dump_episode_line(std::ostream& os, std::size_t id, const Episode& e);

}  // namespace mbrl
