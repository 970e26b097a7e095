#include "mbrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mbrl/world_model.hpp"

namespace mbrl {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;  // ln(2*pi)
constexpr double kAtanhClip = 1.0 - 1e-6;

double atanh_clipped(double a) {
  double c = std::clamp(a, -kAtanhClip, kAtanhClip);
  return std::atanh(c);
}
}  // namespace

void PolicyConfig::validate() const {
  if (alpha < 0.0) throw std::invalid_argument("policy.alpha must be >= 0");
  if (beta < 0.0) throw std::invalid_argument("policy.beta must be >= 0");
  if (!(log_std_min < log_std_max))
    throw std::invalid_argument("policy.log_std bounds must satisfy min < max");
  if (!(lr > 0.0)) throw std::invalid_argument("policy.lr must be positive");
}

Policy Policy::init(const PolicyConfig& cfg, Rng& rng) {
  cfg.validate();
  Policy p;
  p.cfg = cfg;
  std::vector<int> hidden(cfg.depth, cfg.hidden_dim);
  p.trunk = Mlp::make(cfg.latent_dim, hidden, 2 * cfg.act_dim, cfg.activation,
                      OutputKind::value, rng);
  return p;
}

std::vector<Mat*> Policy::trainable_params() { return trunk.params(); }
std::vector<const Mat*> Policy::trainable_params() const { return trunk.params(); }

void Policy::heads(const Mat& z, Mat& mu, Mat& log_std) const {
  Mat out = trunk.forward(z);
  mu = out.topRows(cfg.act_dim);
  log_std = out.bottomRows(cfg.act_dim)
                .array()
                .min(cfg.log_std_max)
                .max(cfg.log_std_min)
                .matrix();
}

Mat Policy::sample_actions(const Mat& z, Rng& rng) const {
  Mat mu, log_std;
  heads(z, mu, log_std);
  Mat xi = rng.normal_mat(cfg.act_dim, static_cast<int>(z.cols()));
  return (mu.array() + log_std.array().exp() * xi.array()).tanh().matrix();
}

std::pair<Vec, double> Policy::sample_action(const Vec& z, Rng& rng) const {
  Mat mu, log_std;
  heads(Mat(z), mu, log_std);
  double logp = 0.0;
  Vec a(cfg.act_dim);
  for (int i = 0; i < cfg.act_dim; ++i) {
    double xi = rng.normal();
    double sigma = std::exp(log_std(i, 0));
    double u = mu(i, 0) + sigma * xi;
    a[i] = std::tanh(u);
    logp += -0.5 * xi * xi - log_std(i, 0) - 0.5 * kLogTwoPi;
    logp -= std::log1p(-a[i] * a[i]);  // tanh change of variables
  }
  return {a, logp};
}

Vec Policy::mean_action(const Vec& z) const {
  Mat mu, log_std;
  heads(Mat(z), mu, log_std);
  return mu.col(0).array().tanh().matrix();
}

double Policy::log_prob(const Vec& z, const Vec& a) const {
  if ((a.array().abs() > 1.0).any())
    throw std::invalid_argument("log_prob: action outside [-1, 1]");
  Mat mu, log_std;
  heads(Mat(z), mu, log_std);
  double logp = 0.0;
  for (int i = 0; i < cfg.act_dim; ++i) {
    double ai = std::clamp(a[i], -kAtanhClip, kAtanhClip);
    double u = std::atanh(ai);
    double sigma = std::exp(log_std(i, 0));
    double t = (u - mu(i, 0)) / sigma;
    logp += -0.5 * t * t - log_std(i, 0) - 0.5 * kLogTwoPi;
    logp -= std::log1p(-ai * ai);
  }
  return logp;
}

double Policy::entropy_estimate(const Vec& z, Rng& rng) const {
  auto [a, logp] = sample_action(z, rng);
  return -logp;
}

double bc_weight(double traj_return, double g_ref, double beta) {
  double denom = std::max(std::abs(g_ref), 1e-6);
  double omega = beta * std::exp((traj_return - g_ref) / denom);
  return std::clamp(omega, 0.0, beta * std::numbers::e);
}

PolicyLoss policy_loss(const Policy& policy, const WorldModel& wm,
                       const Batch& batch, double g_ref, const HyperParams& hp,
                       Rng& rng) {
  const int H = batch.horizon;
  const int B = batch.batch_size;
  const int A = policy.cfg.act_dim;
  const int E = static_cast<int>(wm.value.size());
  if (batch.traj_return.size() != B)
    throw std::invalid_argument("policy_loss: segments lack trajectory returns");

  const bool bc_on = policy.cfg.bc_enabled && policy.cfg.beta > 0.0;

  // Latents along the segment from the online encoder/dynamics, no gradient.
  std::vector<Mat> z(H);
  z[0] = wm.encode(batch.obs[0]);
  for (int t = 0; t + 1 < H; ++t) z[t + 1] = wm.dynamics_step(z[t], batch.act[t]);

  RowVec omega = RowVec::Zero(B);
  if (bc_on)
    for (int b = 0; b < B; ++b)
      omega[b] = bc_weight(batch.traj_return[b], g_ref, policy.cfg.beta);

  Tape tape;
  MlpOnTape trunk = put_on_tape(tape, policy.trunk, true);
  std::vector<MlpOnTape> val;
  for (const Mlp& v : wm.value) val.push_back(put_on_tape(tape, v, false));

  const double ent_sign =
      policy.cfg.entropy_sign == EntropySign::bonus ? 1.0 : -1.0;

  Var objective;
  double weight = 1.0;
  for (int t = 0; t < H; ++t) {
    Var out = trunk.forward(tape, tape.constant(z[t]));
    Var mu = tape.slice_rows(out, 0, A);
    Var log_std = tape.clamp(tape.slice_rows(out, A, A), policy.cfg.log_std_min,
                             policy.cfg.log_std_max);
    Var sigma = tape.exp(log_std);

    Var obj_t;

    if (bc_on) {
      // log pi(a_t | z_t) for the stored actions.
      Mat u = batch.act[t].unaryExpr([](double a) { return atanh_clipped(a); });
      Var diff = tape.sub_from(u, mu);
      Var scaled = tape.cwise_mul(diff, tape.exp(tape.scale(log_std, -1.0)));
      Var logp = tape.add(tape.scale(tape.sum_rows(tape.square(scaled)), -0.5),
                          tape.scale(tape.sum_rows(log_std), -1.0));
      RowVec const_terms(B);
      for (int b = 0; b < B; ++b) {
        double corr = 0.0;
        for (int i = 0; i < A; ++i) {
          double ai = std::clamp(batch.act[t](i, b), -kAtanhClip, kAtanhClip);
          corr += std::log1p(-ai * ai);
        }
        const_terms[b] = -0.5 * A * kLogTwoPi - corr;
      }
      logp = tape.add_rowvec(logp, const_terms);
      obj_t = tape.mul_rowvec(logp, omega);
    }

    // Q at a reparameterized fresh sample; value parameters are frozen so the
    // gradient reaches the policy only through the action.
    Mat xi = rng.normal_mat(A, B);
    Var a_sample = tape.tanh(tape.add(mu, tape.cwise_mul(sigma, xi)));
    Var za = tape.vcat(tape.constant(z[t]), a_sample);
    Var q;
    for (int e = 0; e < E; ++e) {
      Var qe = tape.twohot_decode_cols(val[e].forward(tape, za), wm.cfg.head_spec);
      q = e == 0 ? qe : tape.cwise_min(q, qe);
    }
    obj_t = bc_on ? tape.add(obj_t, q) : q;

    // Single-sample entropy estimate -log pi(a_sample | z_t). The Gaussian
    // part collapses to 0.5*xi^2 + log_std + const since (u - mu)/sigma = xi.
    Var ent = tape.add(tape.sum_rows(log_std),
                       tape.sum_rows(tape.log_one_minus_square(a_sample)));
    RowVec ent_const(B);
    for (int b = 0; b < B; ++b)
      ent_const[b] = 0.5 * xi.col(b).squaredNorm() + 0.5 * A * kLogTwoPi;
    ent = tape.add_rowvec(ent, ent_const);
    obj_t = tape.add(obj_t, tape.scale(ent, ent_sign * policy.cfg.alpha));

    Var weighted = tape.scale(obj_t, weight);
    objective = t == 0 ? weighted : tape.add(objective, weighted);
    weight *= hp.lambda;
  }

  Var loss = tape.scale(tape.sum(objective), -1.0 / B);
  tape.backward(loss);

  PolicyLoss out;
  out.total = tape.value(loss)(0, 0);
  out.omega_mean = bc_on ? omega.mean() : 0.0;
  trunk.collect_grads(tape, out.grads);
  return out;
}

}  // namespace mbrl
