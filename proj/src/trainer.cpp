#include "mbrl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mbrl {

namespace {

using Clock = std::chrono::steady_clock;

constexpr char kCheckpointMagic[8] = {'M', 'B', 'R', 'L', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

double finite_r_max(const ReplayBuffer& b) {
  double r = b.r_max();
  return std::isfinite(r) ? r : 0.0;
}

// ---- little-endian binary primitives ----
template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

void write_mat(std::ostream& os, const Mat& m) {
  write_pod<std::int64_t>(os, m.rows());
  write_pod<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Mat read_mat(std::istream& is) {
  auto rows = read_pod<std::int64_t>(is);
  auto cols = read_pod<std::int64_t>(is);
  Mat m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw std::runtime_error("checkpoint: truncated matrix");
  return m;
}

void write_vec(std::ostream& os, const Vec& v) { write_mat(os, Mat(v)); }
Vec read_vec(std::istream& is) { return read_mat(is).col(0); }

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  auto n = read_pod<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

void write_mlp(std::ostream& os, const Mlp& net) {
  write_pod<std::int32_t>(os, net.num_layers());
  for (int i = 0; i < net.num_layers(); ++i) {
    write_mat(os, net.weights[i]);
    write_mat(os, net.biases[i]);
  }
}

void read_mlp_params(std::istream& is, Mlp& net) {
  auto n = read_pod<std::int32_t>(is);
  if (n != net.num_layers()) throw std::runtime_error("checkpoint: layer count mismatch");
  for (int i = 0; i < n; ++i) {
    net.weights[i] = read_mat(is);
    net.biases[i] = read_mat(is);
  }
}

void write_adam(std::ostream& os, const AdamState& s) {
  write_pod<std::int64_t>(os, s.step);
  write_pod<std::uint64_t>(os, s.m.size());
  for (const Mat& m : s.m) write_mat(os, m);
  for (const Mat& v : s.v) write_mat(os, v);
}

void read_adam(std::istream& is, AdamState& s) {
  s.step = read_pod<std::int64_t>(is);
  auto n = read_pod<std::uint64_t>(is);
  if (n != s.m.size()) throw std::runtime_error("checkpoint: optimizer shape mismatch");
  for (Mat& m : s.m) m = read_mat(is);
  for (Mat& v : s.v) v = read_mat(is);
}

void write_rng(std::ostream& os, const Rng& rng) {
  for (std::uint64_t w : rng.state()) write_pod(os, w);
}

void read_rng(std::istream& is, Rng& rng) {
  std::array<std::uint64_t, 4> st{};
  for (auto& w : st) w = read_pod<std::uint64_t>(is);
  rng.set_state(st);
}

void write_episode(std::ostream& os, const Episode& e) {
  write_pod<std::uint64_t>(os, e.observations.size());
  for (const Vec& o : e.observations) write_vec(os, o);
  write_pod<std::uint64_t>(os, e.actions.size());
  for (const Vec& a : e.actions) write_vec(os, a);
  write_pod<std::uint64_t>(os, e.rewards.size());
  for (double r : e.rewards) write_pod(os, r);
  for (double u : e.upright) write_pod(os, u);
  write_pod(os, e.trajectory_return);
  write_pod<std::uint8_t>(os, e.complete ? 1 : 0);
  write_pod<std::uint8_t>(os, e.terminated ? 1 : 0);
}

Episode read_episode(std::istream& is) {
  Episode e;
  auto n_obs = read_pod<std::uint64_t>(is);
  e.observations.reserve(n_obs);
  for (std::uint64_t i = 0; i < n_obs; ++i) e.observations.push_back(read_vec(is));
  auto n_act = read_pod<std::uint64_t>(is);
  e.actions.reserve(n_act);
  for (std::uint64_t i = 0; i < n_act; ++i) e.actions.push_back(read_vec(is));
  auto n_rew = read_pod<std::uint64_t>(is);
  e.rewards.resize(n_rew);
  e.upright.resize(n_rew);
  for (auto& r : e.rewards) r = read_pod<double>(is);
  for (auto& u : e.upright) u = read_pod<double>(is);
  e.trajectory_return = read_pod<double>(is);
  e.complete = read_pod<std::uint8_t>(is) != 0;
  e.terminated = read_pod<std::uint8_t>(is) != 0;
  return e;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::string MetricsRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["l_d"] = l_d;
  j["l_r"] = l_r;
  j["l_q"] = l_q;
  j["policy_loss"] = policy_loss;
  j["omega_mean"] = omega_mean;
  j["r_max"] = r_max;
  j["eval_return_mean"] = eval_return_mean;
  j["eval_return_std"] = eval_return_std;
  j["upright_mean"] = upright_mean;
  j["wall_clock_update_s"] = wall_clock_update_s;
  return j.dump();
}

MetricsRecord MetricsRecord::from_json_line(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  MetricsRecord r;
  r.step = j.at("step").get<long>();
  r.l_d = j.at("l_d").get<double>();
  r.l_r = j.at("l_r").get<double>();
  r.l_q = j.at("l_q").get<double>();
  r.policy_loss = j.at("policy_loss").get<double>();
  r.omega_mean = j.at("omega_mean").get<double>();
  r.r_max = j.at("r_max").get<double>();
  r.eval_return_mean = j.at("eval_return_mean").get<double>();
  r.eval_return_std = j.at("eval_return_std").get<double>();
  r.upright_mean = j.at("upright_mean").get<double>();
  r.wall_clock_update_s = j.at("wall_clock_update_s").get<double>();
  return r;
}

std::string RunSummary::to_json() const {
  nlohmann::ordered_json j;
  if (steps_to_target >= 0) j["steps_to_target"] = steps_to_target;
  else j["steps_to_target"] = nullptr;
  j["reached_target"] = steps_to_target >= 0;
  j["final_eval_return_mean"] = final_eval_return_mean;
  j["final_eval_return_std"] = final_eval_return_std;
  j["final_r_max"] = final_r_max;
  j["total_updates"] = total_updates;
  j["total_env_steps"] = total_env_steps;
  j["update_seconds_total"] = update_seconds_total;
  return j.dump(2);
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      spec_(cfg.env_spec()),
      buffer_(cfg.replay_capacity, cfg.return_mode, cfg.hp.gamma),
      env_stream_(Rng::stream(cfg.seed, 1)),
      warmup_stream_(Rng::stream(cfg.seed, 2)),
      plan_stream_(Rng::stream(cfg.seed, 3)),
      update_stream_(Rng::stream(cfg.seed, 4)) {
  validate_config(cfg_);
  cfg_.hp.validate();
  Rng init_wm = Rng::stream(cfg.seed, 10);
  Rng init_pol = Rng::stream(cfg.seed, 11);
  wm_ = WorldModel::init(cfg.world_model_config(), init_wm);
  pol_ = Policy::init(cfg.policy_config(), init_pol);
  wm_opt_ = AdamState::like(wm_.trainable_params(), cfg.hp.lr);
  pol_opt_ = AdamState::like(pol_.trainable_params(), cfg.policy_lr);
  plan_dist_ = PlanDistribution::initial(spec_.act_dim, cfg.hp.horizon, 0.5);
  init_episode();
}

void Trainer::init_episode() {
  env_ = env_reset(spec_, env_stream_.next_u64());
  buffer_.begin_episode(env_.observation);
  plan_dist_ = PlanDistribution::initial(spec_.act_dim, cfg_.hp.horizon, 0.5);
  episode_open_ = true;
}

std::optional<MetricsRecord> Trainer::train_step() {
  if (env_step_ >= cfg_.total_steps)
    throw std::logic_error("train_step: run is already complete");
  if (!episode_open_) init_episode();

  // act
  Vec action;
  if (env_step_ < cfg_.warmup_steps) {
    action = Vec(spec_.act_dim);
    for (int i = 0; i < spec_.act_dim; ++i) action[i] = warmup_stream_.uniform(-1.0, 1.0);
  } else if (cfg_.plan_enabled) {
    Vec z0 = wm_.encode(env_.observation);
    plan_dist_.shift(0.5);
    PlanResult res = plan(AgentPlanModel{wm_, pol_}, z0, cfg_.plan_config(),
                          plan_dist_, cfg_.hp.horizon, cfg_.hp.gamma,
                          /*eval_mode=*/false, plan_stream_);
    plan_dist_ = res.dist;
    action = res.action;
  } else {
    Vec z0 = wm_.encode(env_.observation);
    action = pol_.sample_action(z0, plan_stream_).first;
  }

  StepResult sr = env_step(env_, action);
  buffer_.append_step(action, sr.reward, sr.upright, sr.observation);
  env_step_ += 1;
  if (sr.terminated || sr.truncated) {
    buffer_.finish_episode(sr.terminated);
    episode_open_ = false;
    if (env_step_ < cfg_.total_steps) init_episode();
  }

  // learn
  if (env_step_ > cfg_.warmup_steps) {
    update_credit_ += cfg_.updates_per_step;
    while (update_credit_ >= 1.0) {
      update_credit_ -= 1.0;
      update_round();
    }
  }

  // evaluate / record
  bool eval_due = env_step_ % cfg_.eval_interval == 0 || env_step_ == cfg_.total_steps;
  if (eval_due) return make_record();
  return std::nullopt;
}

void Trainer::update_round() {
  auto batch = buffer_.sample(cfg_.hp.batch_size, cfg_.hp.horizon, update_stream_);
  if (!batch) return;  // not ready yet; retry on a later step
  auto t0 = Clock::now();
  WorldModelLoss wl = world_model_loss(wm_, pol_, *batch, cfg_.hp, update_stream_);
  adam_step(wm_.trainable_params(), wl.grads, wm_opt_);
  double g_ref = pol_.cfg.g_mode == GMode::r_max ? buffer_.r_max() : spec_.r_target;
  PolicyLoss pl = policy_loss(pol_, wm_, *batch, g_ref, cfg_.hp, update_stream_);
  adam_step(pol_.trainable_params(), pl.grads, pol_opt_);
  wm_.ema_update(cfg_.hp.tau_ema);
  auto t1 = Clock::now();

  if (cfg_.log_wall_clock) {
    double secs = std::chrono::duration<double>(t1 - t0).count();
    acc_update_seconds_ += secs;
    update_seconds_total_ += secs;
  }
  acc_l_d_ += wl.consistency;
  acc_l_r_ += wl.reward_ce;
  acc_l_q_ += wl.value_ce;
  acc_policy_loss_ += pl.total;
  acc_omega_ += pl.omega_mean;
  acc_updates_ += 1;
  total_updates_ += 1;
}

std::uint64_t Trainer::eval_seed_for(long step) const {
  std::uint64_t x = cfg_.seed ^ 0x6576616cull;  // eval-only stream family
  return Rng::stream(x, static_cast<std::uint64_t>(step)).next_u64();
}

MetricsRecord Trainer::make_record() {
  EvalStats stats = evaluate(cfg_.eval_episodes, eval_seed_for(env_step_));
  MetricsRecord rec;
  rec.step = env_step_;
  if (acc_updates_ > 0) {
    rec.l_d = acc_l_d_ / acc_updates_;
    rec.l_r = acc_l_r_ / acc_updates_;
    rec.l_q = acc_l_q_ / acc_updates_;
    rec.policy_loss = acc_policy_loss_ / acc_updates_;
    rec.omega_mean = acc_omega_ / acc_updates_;
    rec.wall_clock_update_s = acc_update_seconds_ / acc_updates_;
  }
  rec.r_max = finite_r_max(buffer_);
  rec.eval_return_mean = stats.return_mean;
  rec.eval_return_std = stats.return_std;
  rec.upright_mean = stats.upright.mean;
  acc_l_d_ = acc_l_r_ = acc_l_q_ = acc_policy_loss_ = acc_omega_ = 0.0;
  acc_update_seconds_ = 0.0;
  acc_updates_ = 0;
  if (steps_to_target_ < 0 && stats.return_mean >= spec_.r_target)
    steps_to_target_ = env_step_;
  return rec;
}

EvalStats Trainer::evaluate(int episodes, std::uint64_t seed) const {
  if (episodes <= 0)
    throw std::invalid_argument("evaluate: episode count must be positive");
  EvalStats stats;
  std::vector<double> returns;
  std::vector<double> pooled_upright;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng ep_rng = Rng::stream(seed, 100 + static_cast<std::uint64_t>(ep));
    Rng plan_rng = Rng::stream(seed, 10000 + static_cast<std::uint64_t>(ep));
    EnvState env = env_reset(spec_, ep_rng.next_u64());
    PlanDistribution dist = PlanDistribution::initial(spec_.act_dim, cfg_.hp.horizon, 0.5);
    Episode episode;
    episode.observations.push_back(env.observation);
    bool done = false;
    while (!done) {
      Vec action;
      if (cfg_.plan_enabled) {
        Vec z0 = wm_.encode(env.observation);
        dist.shift(0.5);
        PlanResult res = plan(AgentPlanModel{wm_, pol_}, z0, cfg_.plan_config(),
                              dist, cfg_.hp.horizon, cfg_.hp.gamma,
                              /*eval_mode=*/true, plan_rng);
        dist = res.dist;
        action = res.action;
      } else {
        action = pol_.mean_action(wm_.encode(env.observation));
      }
      StepResult sr = env_step(env, action);
      episode.actions.push_back(action);
      episode.rewards.push_back(sr.reward);
      episode.upright.push_back(sr.upright);
      episode.observations.push_back(sr.observation);
      pooled_upright.push_back(sr.upright);
      done = sr.terminated || sr.truncated;
      if (done) episode.terminated = sr.terminated;
    }
    episode.complete = true;
    episode.trajectory_return =
        episode_return(episode.rewards, ReturnMode::undiscounted);
    returns.push_back(episode.trajectory_return);
    stats.episodes.push_back(std::move(episode));
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var /= static_cast<double>(returns.size());
  stats.return_mean = mean;
  stats.return_std = std::sqrt(var);

  Episode pooled;
  pooled.upright = std::move(pooled_upright);
  if (!pooled.upright.empty()) stats.upright = upright_distribution(pooled);
  return stats;
}

RunSummary Trainer::run(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl",
                        std::ios::out | std::ios::app);
  if (!metrics) throw std::runtime_error("run: cannot write to " + out_dir);

  std::optional<MetricsRecord> final_record;
  while (env_step_ < cfg_.total_steps) {
    auto rec = train_step();
    if (rec) {
      metrics << rec->to_json_line() << "\n";
      metrics.flush();
      if (rec->step == cfg_.total_steps) final_record = rec;
    }
    if (cfg_.checkpoint_interval > 0 && env_step_ % cfg_.checkpoint_interval == 0 &&
        env_step_ < cfg_.total_steps) {
      save_checkpoint((fs::path(out_dir) /
                       ("checkpoint_" + std::to_string(env_step_) + ".bin"))
                          .string());
    }
  }
  if (!final_record) {
    MetricsRecord rec = make_record();
    metrics << rec.to_json_line() << "\n";
    final_record = rec;
  }
  RunSummary summary;
  summary.steps_to_target = steps_to_target_;
  summary.final_eval_return_mean = final_record->eval_return_mean;
  summary.final_eval_return_std = final_record->eval_return_std;
  summary.final_r_max = finite_r_max(buffer_);
  summary.total_updates = total_updates_;
  summary.total_env_steps = env_step_;
  summary.update_seconds_total = update_seconds_total_;

  save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string());
  std::ofstream sum(fs::path(out_dir) / "summary.json");
  sum << summary.to_json() << "\n";
  return summary;
}

void Trainer::serialize(std::ostream& os, bool include_timing) const {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(os, kCheckpointVersion);
  write_pod(os, config_hash(cfg_));
  write_string(os, serialize_config(cfg_));

  write_pod(os, env_step_);
  write_pod(os, total_updates_);
  write_pod(os, update_credit_);
  write_pod(os, steps_to_target_);
  write_pod(os, acc_l_d_);
  write_pod(os, acc_l_r_);
  write_pod(os, acc_l_q_);
  write_pod(os, acc_policy_loss_);
  write_pod(os, acc_omega_);
  write_pod(os, acc_updates_);
  write_pod(os, include_timing ? acc_update_seconds_ : 0.0);
  write_pod(os, include_timing ? update_seconds_total_ : 0.0);

  write_rng(os, env_stream_);
  write_rng(os, warmup_stream_);
  write_rng(os, plan_stream_);
  write_rng(os, update_stream_);

  write_pod<std::uint8_t>(os, episode_open_ ? 1 : 0);
  write_vec(os, env_.observation);
  write_vec(os, env_.internal);
  write_pod<std::int32_t>(os, env_.step_index);
  write_pod<std::uint8_t>(os, env_.terminated ? 1 : 0);
  write_mat(os, plan_dist_.mean);
  write_mat(os, plan_dist_.std);

  write_mlp(os, wm_.encoder);
  write_mlp(os, wm_.dynamics);
  write_mlp(os, wm_.reward);
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(wm_.value.size()));
  for (const Mlp& v : wm_.value) write_mlp(os, v);
  write_mlp(os, wm_.target_encoder);
  for (const Mlp& v : wm_.target_value) write_mlp(os, v);
  write_mlp(os, pol_.trunk);
  write_adam(os, wm_opt_);
  write_adam(os, pol_opt_);

  write_pod<std::uint64_t>(os, buffer_.episodes().size());
  for (const Episode& e : buffer_.episodes()) write_episode(os, e);
  write_pod<std::uint8_t>(os, buffer_.has_open_episode() ? 1 : 0);
  if (buffer_.has_open_episode()) write_episode(os, *buffer_.open_episode());
}

void Trainer::deserialize(std::istream& is) {
  env_step_ = read_pod<long>(is);
  total_updates_ = read_pod<long>(is);
  update_credit_ = read_pod<double>(is);
  steps_to_target_ = read_pod<long>(is);
  acc_l_d_ = read_pod<double>(is);
  acc_l_r_ = read_pod<double>(is);
  acc_l_q_ = read_pod<double>(is);
  acc_policy_loss_ = read_pod<double>(is);
  acc_omega_ = read_pod<double>(is);
  acc_updates_ = read_pod<long>(is);
  acc_update_seconds_ = read_pod<double>(is);
  update_seconds_total_ = read_pod<double>(is);

  read_rng(is, env_stream_);
  read_rng(is, warmup_stream_);
  read_rng(is, plan_stream_);
  read_rng(is, update_stream_);

  episode_open_ = read_pod<std::uint8_t>(is) != 0;
  env_.spec = spec_;
  env_.observation = read_vec(is);
  env_.internal = read_vec(is);
  env_.step_index = read_pod<std::int32_t>(is);
  env_.terminated = read_pod<std::uint8_t>(is) != 0;
  plan_dist_.mean = read_mat(is);
  plan_dist_.std = read_mat(is);

  read_mlp_params(is, wm_.encoder);
  read_mlp_params(is, wm_.dynamics);
  read_mlp_params(is, wm_.reward);
  auto n_val = read_pod<std::int32_t>(is);
  if (n_val != static_cast<std::int32_t>(wm_.value.size()))
    throw std::runtime_error("checkpoint: ensemble size mismatch");
  for (Mlp& v : wm_.value) read_mlp_params(is, v);
  read_mlp_params(is, wm_.target_encoder);
  for (Mlp& v : wm_.target_value) read_mlp_params(is, v);
  read_mlp_params(is, pol_.trunk);
  read_adam(is, wm_opt_);
  read_adam(is, pol_opt_);

  auto n_eps = read_pod<std::uint64_t>(is);
  std::deque<Episode> eps;
  for (std::uint64_t i = 0; i < n_eps; ++i) eps.push_back(read_episode(is));
  std::optional<Episode> open;
  if (read_pod<std::uint8_t>(is) != 0) open = read_episode(is);
  buffer_.restore(std::move(eps), std::move(open));
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  serialize(os, /*include_timing=*/true);
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Trainer Trainer::load_checkpoint(const std::string& path,
                                 const TrainConfig* expected, bool force) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: not a checkpoint file: " + path);
  auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  auto stored_hash = read_pod<std::uint64_t>(is);
  std::string cfg_text = read_string(is);
  TrainConfig cfg = parse_config_text(cfg_text);
  if (config_hash(cfg) != stored_hash)
    throw std::runtime_error("load_checkpoint: corrupt checkpoint (config hash)");
  if (expected && config_hash(*expected) != stored_hash && !force)
    throw std::runtime_error(
        "load_checkpoint: config hash mismatch (pass force to override)");

  Trainer t(cfg);
  t.buffer_ = ReplayBuffer(cfg.replay_capacity, cfg.return_mode, cfg.hp.gamma);
  t.deserialize(is);
  return t;
}

std::uint64_t Trainer::params_hash() const {
  std::ostringstream os(std::ios::binary);
  write_mlp(os, wm_.encoder);
  write_mlp(os, wm_.dynamics);
  write_mlp(os, wm_.reward);
  for (const Mlp& v : wm_.value) write_mlp(os, v);
  write_mlp(os, wm_.target_encoder);
  for (const Mlp& v : wm_.target_value) write_mlp(os, v);
  write_mlp(os, pol_.trunk);
  return fnv1a(os.str());
}

std::uint64_t Trainer::state_hash() const {
  std::ostringstream os(std::ios::binary);
  serialize(os, /*include_timing=*/false);
  return fnv1a(os.str());
}

}  // namespace mbrl
