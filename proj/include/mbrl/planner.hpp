#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mbrl/rng.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

// Sampling-based planner that iteratively refits a per-timestep diagonal
// Gaussian over H-step action sequences. The model is any type providing
//   Mat dynamics_step(const Mat& z, const Mat& a) const;
//   RowVec reward_decode(const Mat& z, const Mat& a) const;
//   RowVec terminal_value(const Mat& z, Rng& rng) const;
//   Mat sample_policy_actions(const Mat& z, Rng& rng) const;
// with columns as independent rollouts throughout.

struct PlanConfig {
  bool enabled = true;
  int iterations = 6;
  int num_samples = 64;
  int num_elites = 8;
  double policy_fraction = 0.375;  // 24 of 64 rollouts seeded by the prior
  double temperature = 0.5;
  double sigma_floor = 0.05;
  double sigma_init = 0.5;
  double sigma_max = 2.0;

  void validate() const {
    if (iterations < 0) throw std::invalid_argument("planner.plan_iters must be >= 0");
    if (num_samples < 1) throw std::invalid_argument("planner.plan_samples must be >= 1");
    if (num_elites < 1 || num_elites > num_samples)
      throw std::invalid_argument("planner.plan_elites must be in [1, plan_samples]");
    if (policy_fraction < 0.0 || policy_fraction > 1.0)
      throw std::invalid_argument("planner.plan_policy_frac must be in [0, 1]");
    if (!(sigma_floor > 0.0))
      throw std::invalid_argument("planner.plan_sigma_floor must be positive");
  }
};

struct PlanDistribution {
  Mat mean;  // act_dim x horizon
  Mat std;   // act_dim x horizon

  static PlanDistribution initial(int act_dim, int horizon, double sigma_init) {
    PlanDistribution d;
    d.mean = Mat::Zero(act_dim, horizon);
    d.std = Mat::Constant(act_dim, horizon, sigma_init);
    return d;
  }

  // Warm start for the next environment step: shift one step left, pad with
  // zeros, reset the spread.
  void shift(double sigma_init) {
    int h = static_cast<int>(mean.cols());
    if (h > 1) mean.leftCols(h - 1) = mean.rightCols(h - 1).eval();
    mean.col(h - 1).setZero();
    std.setConstant(sigma_init);
  }
};

struct PlanResult {
  Vec action;
  PlanDistribution dist;
  double best_elite_return = 0.0;
  std::vector<double> elite_trace;  // best elite score after each iteration
  int policy_candidates = 0;        // prior-seeded rollouts per iteration
};

// Eq.-style return estimate of action sequences under the model:
// sum_t gamma^t r(z_t, a_t) + gamma^H V(z_H). Column b of each actions[t]
// belongs to candidate b.
template <class Model>
RowVec estimate_returns(const Model& model, const Mat& z0,
                        const std::vector<Mat>& actions, double gamma, Rng& rng) {
  Mat z = z0;
  RowVec total = RowVec::Zero(z0.cols());
  double w = 1.0;
  for (const Mat& a : actions) {
    total += w * model.reward_decode(z, a);
    z = model.dynamics_step(z, a);
    w *= gamma;
  }
  total += w * model.terminal_value(z, rng);
  return total;
}

template <class Model>
double estimate_return(const Model& model, const Vec& z0,
                       const std::vector<Vec>& actions, double gamma, Rng& rng) {
  std::vector<Mat> cols;
  cols.reserve(actions.size());
  for (const Vec& a : actions) cols.emplace_back(a);
  return estimate_returns(model, Mat(z0), cols, gamma, rng)[0];
}

namespace detail {

// Elite weights: softmax of temperature * z-scored elite returns. Z-scoring
// keeps the temperature meaningful across reward scales; equal scores yield
// uniform weights.
inline Vec elite_weights(const Vec& scores, double temperature) {
  double mean = scores.mean();
  double var = (scores.array() - mean).square().mean();
  double sd = std::sqrt(var);
  Vec norm = Vec::Zero(scores.size());
  if (sd > 1e-12) norm = ((scores.array() - mean) / sd).matrix();
  Vec w = (temperature * norm.array()).exp().matrix();
  return w / w.sum();
}

}  // namespace detail

template <class Model>
PlanResult plan(const Model& model, const Vec& z0, const PlanConfig& cfg,
                const PlanDistribution& prev, int horizon, double gamma,
                bool eval_mode, Rng& rng) {
  cfg.validate();
  const int act_dim = static_cast<int>(prev.mean.rows());
  const int n_policy =
      cfg.iterations > 0
          ? static_cast<int>(std::lround(cfg.policy_fraction * cfg.num_samples))
          : 0;
  const int n_gauss = cfg.num_samples - n_policy;

  PlanResult result;
  result.dist = prev;
  result.policy_candidates = n_policy;

  // With no refit iterations the planner degenerates: act from the prior
  // distribution, or from the policy itself when every candidate would have
  // been policy-seeded.
  if (cfg.iterations == 0) {
    if (eval_mode) {
      result.action = result.dist.mean.col(0).cwiseMax(-1.0).cwiseMin(1.0);
    } else if (cfg.policy_fraction >= 1.0) {
      result.action = model.sample_policy_actions(Mat(z0), rng).col(0);
    } else {
      Vec noise = rng.normal_vec(act_dim);
      result.action = (result.dist.mean.col(0) +
                       result.dist.std.col(0).cwiseProduct(noise))
                          .cwiseMax(-1.0)
                          .cwiseMin(1.0);
    }
    return result;
  }

  std::vector<Mat> actions(horizon, Mat(act_dim, cfg.num_samples));
  Mat retained;  // best sequence so far, re-injected as a candidate
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // Gaussian candidates from the current distribution.
    for (int t = 0; t < horizon; ++t) {
      Mat noise = rng.normal_mat(act_dim, n_gauss);
      actions[t].leftCols(n_gauss) =
          ((noise.array().colwise() * result.dist.std.col(t).array())
               .colwise() +
           result.dist.mean.col(t).array())
              .min(1.0)
              .max(-1.0)
              .matrix();
    }
    if (iter > 0 && n_gauss > 0) {
      for (int t = 0; t < horizon; ++t) actions[t].col(0) = retained.col(t);
    }
    // Prior-seeded candidates: closed-loop policy rollouts through the model.
    if (n_policy > 0) {
      Mat z = Mat(z0).replicate(1, n_policy);
      for (int t = 0; t < horizon; ++t) {
        Mat a = model.sample_policy_actions(z, rng);
        actions[t].rightCols(n_policy) = a;
        if (t + 1 < horizon) z = model.dynamics_step(z, a);
      }
    }

    RowVec scores = estimate_returns(model, Mat(z0).replicate(1, cfg.num_samples),
                                     actions, gamma, rng);

    // Top-K elites, ties broken by candidate index for determinism.
    std::vector<int> order(cfg.num_samples);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    Vec elite_scores(cfg.num_elites);
    for (int k = 0; k < cfg.num_elites; ++k) elite_scores[k] = scores[order[k]];
    result.best_elite_return = elite_scores[0];
    result.elite_trace.push_back(elite_scores[0]);
    retained.resize(act_dim, horizon);
    for (int t = 0; t < horizon; ++t) retained.col(t) = actions[t].col(order[0]);

    Vec w = detail::elite_weights(elite_scores, cfg.temperature);
    for (int t = 0; t < horizon; ++t) {
      Vec mu = Vec::Zero(act_dim);
      for (int k = 0; k < cfg.num_elites; ++k)
        mu += w[k] * actions[t].col(order[k]);
      Vec var = Vec::Zero(act_dim);
      for (int k = 0; k < cfg.num_elites; ++k)
        var += w[k] * (actions[t].col(order[k]) - mu).array().square().matrix();
      result.dist.mean.col(t) = mu;
      // Spread may shrink at most 2x per refit; collapsing faster than the
      // mean localizes stalls the search.
      Vec lower = (0.5 * result.dist.std.col(t).array()).max(cfg.sigma_floor).matrix();
      result.dist.std.col(t) = var.array()
                                   .sqrt()
                                   .max(lower.array())
                                   .min(cfg.sigma_max)
                                   .matrix();
    }
  }

  if (eval_mode) {
    result.action = result.dist.mean.col(0);
  } else {
    Vec noise = rng.normal_vec(act_dim);
    result.action = (result.dist.mean.col(0) +
                     result.dist.std.col(0).cwiseProduct(noise))
                        .cwiseMax(-1.0)
                        .cwiseMin(1.0);
  }
  return result;
}

}  // namespace mbrl
