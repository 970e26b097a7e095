#pragma once

#include <vector>

#include "mbrl/mlp.hpp"
#include "mbrl/replay.hpp"
#include "mbrl/rng.hpp"
#include "mbrl/twohot.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

struct Policy;  // policy.hpp

struct WorldModelConfig {
  int obs_dim = 4;
  int act_dim = 2;
  int latent_dim = 32;
  int hidden_dim = 64;
  int depth = 2;          // hidden layers per net
  int ensemble_size = 2;  // value heads
  TwoHotSpec head_spec;   // shared by reward and value heads
  Activation activation = Activation::tanh;
};

struct HyperParams {
  double gamma = 0.99;
  int horizon = 3;
  double lambda = 0.5;  // temporal decay of per-step loss terms
  double tau_ema = 0.01;
  double lr = 3e-4;
  int batch_size = 64;

  void validate() const;  // throws on out-of-range values
};

// Latent world model: encoder, dynamics, reward head, value ensemble, plus
// EMA target copies of the encoder and value heads for stop-gradient targets.
struct WorldModel {
  WorldModelConfig cfg;
  Mlp encoder;
  Mlp dynamics;
  Mlp reward;
  std::vector<Mlp> value;
  Mlp target_encoder;
  std::vector<Mlp> target_value;

  static WorldModel init(const WorldModelConfig& cfg, Rng& rng);

  // Online parameters in a fixed order (encoder, dynamics, reward, values).
  // Target copies are deliberately absent: nothing optimizes them.
  std::vector<Mat*> trainable_params();
  std::vector<const Mat*> trainable_params() const;

  // ---- raw forward paths (no gradients) ----
  Mat encode(const Mat& obs) const;
  Vec encode(const Vec& obs) const;
  Mat target_encode(const Mat& obs) const;
  Mat dynamics_step(const Mat& z, const Mat& a) const;
  RowVec reward_decode(const Mat& z, const Mat& a) const;
  RowVec value_decode_min(const Mat& z, const Mat& a) const;         // online ensemble
  RowVec target_value_decode_min(const Mat& z, const Mat& a) const;  // EMA ensemble

  // target <- (1 - tau) * target + tau * online, elementwise.
  void ema_update(double tau);
};

struct LatentRollout {
  std::vector<Vec> latents;   // z1..zH
  std::vector<double> rewards;  // decoded r0..r(H-1)
};

// Open-loop rollout of the dynamics with decoded reward estimates.
LatentRollout latent_rollout(const WorldModel& wm, const Vec& z0,
                             const std::vector<Vec>& actions);

// r + gamma * min over the target ensemble at a fresh policy sample from
// z_next (target-encoder path). No gradient: everything here is raw math.
double td_target(const WorldModel& wm, const Policy& policy, double reward,
                 const Vec& z_next, bool done, double gamma, Rng& rng);

struct WorldModelLoss {
  double total = 0.0;
  double consistency = 0.0;  // lambda-weighted batch mean of l_d
  double reward_ce = 0.0;    // ... of l_r
  double value_ce = 0.0;     // ... of l_q
  std::vector<Mat> grads;    // aligned with trainable_params()
};

// Loss over a batch of H-step segments: per step t, weighted lambda^t,
//   l_d = |dynamics(z_t, a_t) - sg(target_encode(s_{t+1}))|^2
//   l_r = CE(reward logits, twohot(r_t))
//   l_q = CE(value logits, twohot(r_t + gamma * (1-done) * min target Q)),
// averaged over the batch. Latents past t=0 come from the rolled-out
// dynamics, so gradients flow through the rollout.
WorldModelLoss world_model_loss(const WorldModel& wm, const Policy& policy,
                                const Batch& batch, const HyperParams& hp,
                                Rng& rng);

}  // namespace mbrl
