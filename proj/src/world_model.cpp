#include "mbrl/world_model.hpp"

#include <cmath>
#include <stdexcept>

#include "mbrl/policy.hpp"

namespace mbrl {

void HyperParams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("model.gamma must be in (0, 1)");
  if (horizon < 1) throw std::invalid_argument("model.horizon must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("model.lambda must be in [0, 1]");
  if (!(tau_ema >= 0.0 && tau_ema <= 1.0))
    throw std::invalid_argument("model.tau_ema must be in [0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("model.lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("model.batch_size must be >= 1");
}

WorldModel WorldModel::init(const WorldModelConfig& cfg, Rng& rng) {
  cfg.head_spec.validate();
  WorldModel wm;
  wm.cfg = cfg;
  std::vector<int> hidden(cfg.depth, cfg.hidden_dim);
  wm.encoder = Mlp::make(cfg.obs_dim, hidden, cfg.latent_dim, cfg.activation,
                         OutputKind::value, rng);
  wm.dynamics = Mlp::make(cfg.latent_dim + cfg.act_dim, hidden, cfg.latent_dim,
                          cfg.activation, OutputKind::value, rng);
  wm.reward = Mlp::make(cfg.latent_dim + cfg.act_dim, hidden, cfg.head_spec.num_bins,
                        cfg.activation, OutputKind::logits, rng);
  for (int e = 0; e < cfg.ensemble_size; ++e)
    wm.value.push_back(Mlp::make(cfg.latent_dim + cfg.act_dim, hidden,
                                 cfg.head_spec.num_bins, cfg.activation,
                                 OutputKind::logits, rng));
  wm.target_encoder = wm.encoder;
  wm.target_value = wm.value;
  return wm;
}

std::vector<Mat*> WorldModel::trainable_params() {
  std::vector<Mat*> p;
  for (Mat* m : encoder.params()) p.push_back(m);
  for (Mat* m : dynamics.params()) p.push_back(m);
  for (Mat* m : reward.params()) p.push_back(m);
  for (Mlp& v : value)
    for (Mat* m : v.params()) p.push_back(m);
  return p;
}

std::vector<const Mat*> WorldModel::trainable_params() const {
  std::vector<const Mat*> p;
  for (const Mat* m : encoder.params()) p.push_back(m);
  for (const Mat* m : dynamics.params()) p.push_back(m);
  for (const Mat* m : reward.params()) p.push_back(m);
  for (const Mlp& v : value)
    for (const Mat* m : v.params()) p.push_back(m);
  return p;
}

Mat WorldModel::encode(const Mat& obs) const { return encoder.forward(obs); }
Vec WorldModel::encode(const Vec& obs) const { return encoder.forward(obs); }
Mat WorldModel::target_encode(const Mat& obs) const { return target_encoder.forward(obs); }

static Mat join_rows(const Mat& z, const Mat& a) {
  Mat za(z.rows() + a.rows(), z.cols());
  za.topRows(z.rows()) = z;
  za.bottomRows(a.rows()) = a;
  return za;
}

Mat WorldModel::dynamics_step(const Mat& z, const Mat& a) const {
  return dynamics.forward(join_rows(z, a));
}

RowVec WorldModel::reward_decode(const Mat& z, const Mat& a) const {
  return decode_cols(reward.forward(join_rows(z, a)), cfg.head_spec);
}

RowVec WorldModel::value_decode_min(const Mat& z, const Mat& a) const {
  Mat za = join_rows(z, a);
  RowVec q = decode_cols(value[0].forward(za), cfg.head_spec);
  for (std::size_t e = 1; e < value.size(); ++e)
    q = q.cwiseMin(decode_cols(value[e].forward(za), cfg.head_spec));
  return q;
}

RowVec WorldModel::target_value_decode_min(const Mat& z, const Mat& a) const {
  Mat za = join_rows(z, a);
  RowVec q = decode_cols(target_value[0].forward(za), cfg.head_spec);
  for (std::size_t e = 1; e < target_value.size(); ++e)
    q = q.cwiseMin(decode_cols(target_value[e].forward(za), cfg.head_spec));
  return q;
}

void WorldModel::ema_update(double tau) {
  auto blend = [tau](Mlp& target, const Mlp& online) {
    for (std::size_t i = 0; i < target.weights.size(); ++i) {
      target.weights[i] = (1.0 - tau) * target.weights[i] + tau * online.weights[i];
      target.biases[i] = (1.0 - tau) * target.biases[i] + tau * online.biases[i];
    }
  };
  blend(target_encoder, encoder);
  for (std::size_t e = 0; e < value.size(); ++e) blend(target_value[e], value[e]);
}

LatentRollout latent_rollout(const WorldModel& wm, const Vec& z0,
                             const std::vector<Vec>& actions) {
  LatentRollout out;
  Vec z = z0;
  for (const Vec& a : actions) {
    Mat za = join_rows(Mat(z), Mat(a));
    out.rewards.push_back(decode_cols(wm.reward.forward(za), wm.cfg.head_spec)[0]);
    z = wm.dynamics.forward(za).col(0);
    out.latents.push_back(z);
  }
  return out;
}

double td_target(const WorldModel& wm, const Policy& policy, double reward,
                 const Vec& z_next, bool done, double gamma, Rng& rng) {
  if (done) return reward;
  Mat z(z_next.size(), 1);
  z.col(0) = z_next;
  Mat a = policy.sample_actions(z, rng);
  return reward + gamma * wm.target_value_decode_min(z, a)[0];
}

WorldModelLoss world_model_loss(const WorldModel& wm, const Policy& policy,
                                const Batch& batch, const HyperParams& hp,
                                Rng& rng) {
  const int H = batch.horizon;
  const int B = batch.batch_size;
  const int E = static_cast<int>(wm.value.size());
  if (static_cast<int>(batch.obs.size()) != H + 1)
    throw std::invalid_argument("world_model_loss: malformed segment batch");

  // Stop-gradient targets: EMA-encoder latents for consistency and TD
  // bootstrap, fresh policy actions at the target latents.
  std::vector<Mat> z_bar(H + 1);
  for (int t = 1; t <= H; ++t) z_bar[t] = wm.target_encode(batch.obs[t]);
  Mat q_target(H, B);
  for (int t = 0; t < H; ++t) {
    Mat a_next = policy.sample_actions(z_bar[t + 1], rng);
    RowVec q_next = wm.target_value_decode_min(z_bar[t + 1], a_next);
    q_target.row(t) = batch.rew.row(t).array() +
                      hp.gamma * (1.0 - batch.done.row(t).array()) * q_next.array();
  }

  Tape tape;
  MlpOnTape enc = put_on_tape(tape, wm.encoder, true);
  MlpOnTape dyn = put_on_tape(tape, wm.dynamics, true);
  MlpOnTape rew = put_on_tape(tape, wm.reward, true);
  std::vector<MlpOnTape> val;
  for (const Mlp& v : wm.value) val.push_back(put_on_tape(tape, v, true));

  Var z = enc.forward(tape, tape.constant(batch.obs[0]));
  Var l_d_sum, l_r_sum, l_q_sum;
  double weight = 1.0;  // lambda^t with the 0^0 = 1 convention
  for (int t = 0; t < H; ++t) {
    Var za = tape.vcat(z, tape.constant(batch.act[t]));
    Var r_logits = rew.forward(tape, za);
    Var l_r = tape.cross_entropy_cols(r_logits, twohot_encode_cols(batch.rew.row(t), wm.cfg.head_spec));
    Var l_q;
    for (int e = 0; e < E; ++e) {
      Var ce = tape.cross_entropy_cols(val[e].forward(tape, za),
                                       twohot_encode_cols(q_target.row(t), wm.cfg.head_spec));
      l_q = e == 0 ? ce : tape.add(l_q, ce);
    }
    l_q = tape.scale(l_q, 1.0 / E);
    Var z_next = dyn.forward(tape, za);
    Var l_d = tape.squared_norm_cols(tape.sub(z_next, tape.constant(z_bar[t + 1])));

    l_d_sum = t == 0 ? tape.scale(l_d, weight) : tape.add(l_d_sum, tape.scale(l_d, weight));
    l_r_sum = t == 0 ? tape.scale(l_r, weight) : tape.add(l_r_sum, tape.scale(l_r, weight));
    l_q_sum = t == 0 ? tape.scale(l_q, weight) : tape.add(l_q_sum, tape.scale(l_q, weight));
    z = z_next;
    weight *= hp.lambda;
  }
  Var total = tape.scale(
      tape.sum(tape.add(l_d_sum, tape.add(l_r_sum, l_q_sum))), 1.0 / B);
  tape.backward(total);

  WorldModelLoss out;
  out.total = tape.value(total)(0, 0);
  out.consistency = tape.value(l_d_sum).sum() / B;
  out.reward_ce = tape.value(l_r_sum).sum() / B;
  out.value_ce = tape.value(l_q_sum).sum() / B;
  enc.collect_grads(tape, out.grads);
  dyn.collect_grads(tape, out.grads);
  rew.collect_grads(tape, out.grads);
  for (const MlpOnTape& v : val) v.collect_grads(tape, out.grads);
  return out;
}

}  // namespace mbrl
