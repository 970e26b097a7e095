#pragma once

#include <utility>

#include "mbrl/mlp.hpp"
#include "mbrl/replay.hpp"
#include "mbrl/rng.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

struct WorldModel;
struct HyperParams;

enum class GMode { r_max, r_target };
enum class EntropySign { bonus, paper_literal };

struct PolicyConfig {
  int latent_dim = 32;
  int act_dim = 2;
  int hidden_dim = 64;
  int depth = 2;
  double alpha = 1e-4;      // entropy coefficient
  double beta = 1.0;        // behavior-cloning coefficient
  GMode g_mode = GMode::r_max;
  EntropySign entropy_sign = EntropySign::bonus;
  bool bc_enabled = true;   // false selects the plain (no-BC) policy objective
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double lr = 3e-4;
  Activation activation = Activation::tanh;

  void validate() const;
};

// Squashed-Gaussian policy prior: the trunk maps a latent to per-dimension
// mean and log-std; actions are tanh(mu + sigma * xi).
struct Policy {
  PolicyConfig cfg;
  Mlp trunk;  // latent_dim -> 2 * act_dim

  static Policy init(const PolicyConfig& cfg, Rng& rng);

  std::vector<Mat*> trainable_params();
  std::vector<const Mat*> trainable_params() const;

  // Batched heads with log-std clamped to the configured bounds.
  void heads(const Mat& z, Mat& mu, Mat& log_std) const;

  // One tanh-squashed sample per column.
  Mat sample_actions(const Mat& z, Rng& rng) const;

  // Sample plus its log-density (with the tanh change-of-variables term).
  std::pair<Vec, double> sample_action(const Vec& z, Rng& rng) const;

  Vec mean_action(const Vec& z) const;  // tanh(mu), the deterministic head

  // Log-density of a stored action; components are pulled to
  // +-(1 - 1e-6) before atanh. Throws if any |a_i| > 1.
  double log_prob(const Vec& z, const Vec& a) const;

  // Single-sample entropy estimator: -log_prob of a fresh sample.
  double entropy_estimate(const Vec& z, Rng& rng) const;
};

// Return-weighted behavior-cloning weight:
//   omega = beta * exp((R - G) / max(|G|, 1e-6)), clamped to [0, beta * e].
double bc_weight(double traj_return, double g_ref, double beta);

struct PolicyLoss {
  double total = 0.0;
  double omega_mean = 0.0;   // mean BC weight over the batch (0 when BC is off)
  std::vector<Mat> grads;    // aligned with trainable_params()
};

// Policy objective over H-step segments (maximized; implemented as the
// negated minimization): per step t, weighted lambda^t,
//   omega(R) * log pi(a_t | z_t)          (self-imitation, when enabled)
//   + min_ensemble Q(z_t, a~pi(z_t))      (reparameterized, decoded two-hot)
//   +- alpha * H_est(pi(.|z_t))           (sign per EntropySign)
// Latents come from the online encoder/dynamics without gradient; world-model
// parameters receive none.
PolicyLoss policy_loss(const Policy& policy, const WorldModel& wm,
                       const Batch& batch, double g_ref, const HyperParams& hp,
                       Rng& rng);

}  // namespace mbrl
