#include "mbrl/replay.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mbrl {

double episode_return(const std::vector<double>& rewards, ReturnMode mode,
                      double gamma) {
  if (rewards.empty())
    throw std::invalid_argument("episode_return: empty reward sequence");
  double total = 0.0;
  if (mode == ReturnMode::undiscounted) {
    for (double r : rewards) total += r;
  } else {
    double w = 1.0;
    for (double r : rewards) {
      total += w * r;
      w *= gamma;
    }
  }
  return total;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_steps, ReturnMode mode, double gamma)
    : capacity_(capacity_steps),
      mode_(mode),
      gamma_(gamma),
      r_max_(-std::numeric_limits<double>::infinity()) {}

void ReplayBuffer::begin_episode(const Vec& first_obs) {
  if (open_)
    throw std::logic_error("begin_episode: an episode is already open");
  open_.emplace();
  open_->observations.push_back(first_obs);
}

void ReplayBuffer::append_step(const Vec& action, double reward, double upright,
                               const Vec& next_obs) {
  if (!open_) throw std::logic_error("append_step: no open episode");
  open_->actions.push_back(action);
  open_->rewards.push_back(reward);
  open_->upright.push_back(upright);
  open_->observations.push_back(next_obs);
  total_steps_ += 1;
}

void ReplayBuffer::finish_episode(bool terminated) {
  if (!open_) throw std::logic_error("finish_episode: no open episode");
  if (open_->rewards.empty())
    throw std::logic_error("finish_episode: episode has no transitions");
  open_->trajectory_return = episode_return(open_->rewards, mode_, gamma_);
  open_->complete = true;
  open_->terminated = terminated;
  r_max_ = std::max(r_max_, open_->trajectory_return);
  episodes_.push_back(std::move(*open_));
  open_.reset();
  next_episode_id_ += 1;
  evict_if_needed();
}

void ReplayBuffer::evict_if_needed() {
  while (total_steps_ > capacity_ && !episodes_.empty()) {
    const Episode& victim = episodes_.front();
    bool held_max = victim.trajectory_return == r_max_;
    total_steps_ -= static_cast<std::size_t>(victim.length());
    episodes_.pop_front();
    first_episode_id_ += 1;
    if (held_max) recompute_r_max();
  }
}

void ReplayBuffer::recompute_r_max() {
  r_max_ = -std::numeric_limits<double>::infinity();
  for (const Episode& e : episodes_) r_max_ = std::max(r_max_, e.trajectory_return);
}

std::optional<Batch> ReplayBuffer::sample(int batch_size, int horizon,
                                          Rng& rng) const {
  if (batch_size <= 0 || horizon < 1)
    throw std::invalid_argument("sample: batch_size and horizon must be positive");
  // Valid starts per episode: an episode with L transitions admits starts
  // 0..L-horizon.
  std::vector<std::pair<const Episode*, long>> eligible;
  long total_starts = 0;
  for (const Episode& e : episodes_) {
    long starts = static_cast<long>(e.length()) - horizon + 1;
    if (starts > 0) {
      eligible.emplace_back(&e, total_starts);
      total_starts += starts;
    }
  }
  if (total_starts == 0) return std::nullopt;

  const int obs_dim = static_cast<int>(eligible.front().first->observations.front().size());
  const int act_dim = static_cast<int>(eligible.front().first->actions.front().size());

  Batch batch;
  batch.horizon = horizon;
  batch.batch_size = batch_size;
  batch.obs.assign(horizon + 1, Mat(obs_dim, batch_size));
  batch.act.assign(horizon, Mat(act_dim, batch_size));
  batch.rew.resize(horizon, batch_size);
  batch.done.setZero(horizon, batch_size);
  batch.traj_return.resize(batch_size);

  for (int b = 0; b < batch_size; ++b) {
    long pick = rng.uniform_index(total_starts);
    // Find the episode whose start-offset range contains `pick`.
    std::size_t lo = 0, hi = eligible.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi + 1) / 2;
      if (eligible[mid].second <= pick) lo = mid;
      else hi = mid - 1;
    }
    const Episode& e = *eligible[lo].first;
    int start = static_cast<int>(pick - eligible[lo].second);
    for (int t = 0; t <= horizon; ++t) batch.obs[t].col(b) = e.observations[start + t];
    for (int t = 0; t < horizon; ++t) {
      batch.act[t].col(b) = e.actions[start + t];
      batch.rew(t, b) = e.rewards[start + t];
      if (e.terminated && start + t == e.length() - 1) batch.done(t, b) = 1.0;
    }
    batch.traj_return[b] = e.trajectory_return;
  }
  return batch;
}

void dump_episode_line(std::ostream& os, std::size_t id, const Episode& e) {
  double upright_mean = 0.0;
  for (double u : e.upright) upright_mean += u;
  if (!e.upright.empty()) upright_mean /= static_cast<double>(e.upright.size());
  nlohmann::json j{{"id", id},
                   {"length", e.length()},
                   {"return", e.trajectory_return},
                   {"upright_mean", upright_mean}};
  os << j.dump() << "\n";
}

void ReplayBuffer::dump_episodes(std::ostream& os) const {
  std::size_t id = first_episode_id_;
  for (const Episode& e : episodes_) dump_episode_line(os, id++, e);
}

void ReplayBuffer::restore(std::deque<Episode> episodes, std::optional<Episode> open) {
  episodes_ = std::move(episodes);
  open_ = std::move(open);
  total_steps_ = 0;
  for (const Episode& e : episodes_) total_steps_ += static_cast<std::size_t>(e.length());
  if (open_) total_steps_ += static_cast<std::size_t>(open_->length());
  recompute_r_max();
}

}  // namespace mbrl
