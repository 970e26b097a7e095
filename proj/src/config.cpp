#include "mbrl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace mbrl {

WorldModelConfig TrainConfig::world_model_config() const {
  WorldModelConfig c;
  c.obs_dim = env_spec().obs_dim;
  c.act_dim = env_spec().act_dim;
  c.latent_dim = latent_dim;
  c.hidden_dim = model_hidden_dim;
  c.depth = model_depth;
  c.ensemble_size = ensemble_size;
  c.head_spec = TwoHotSpec{num_bins, symlog_lo, symlog_hi};
  return c;
}

PolicyConfig TrainConfig::policy_config() const {
  PolicyConfig c;
  c.latent_dim = latent_dim;
  c.act_dim = env_spec().act_dim;
  c.hidden_dim = policy_hidden_dim;
  c.depth = policy_depth;
  c.alpha = alpha;
  c.beta = beta;
  c.g_mode = g_mode_enum();
  c.entropy_sign =
      entropy_sign == "bonus" ? EntropySign::bonus : EntropySign::paper_literal;
  c.bc_enabled = bc_enabled;
  c.log_std_min = log_std_min;
  c.log_std_max = log_std_max;
  c.lr = policy_lr;
  return c;
}

PlanConfig TrainConfig::plan_config() const {
  PlanConfig c;
  c.enabled = plan_enabled;
  c.iterations = plan_iters;
  c.num_samples = plan_samples;
  c.num_elites = plan_elites;
  c.policy_fraction = plan_policy_frac;
  c.temperature = plan_temperature;
  c.sigma_floor = plan_sigma_floor;
  return c;
}

GMode TrainConfig::g_mode_enum() const {
  return g_mode == "r_max" ? GMode::r_max : GMode::r_target;
}

namespace {

struct Field {
  std::string path;  // "section.key"
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <class T>
T parse_number(const std::string& path, const std::string& raw) {
  std::istringstream is(raw);
  T v{};
  is >> v;
  if (is.fail() || !(is >> std::ws).eof())
    throw ConfigError("config key '" + path + "': cannot parse value '" + raw + "'");
  return v;
}

bool parse_bool(const std::string& path, const std::string& raw) {
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  throw ConfigError("config key '" + path + "': expected a boolean, got '" + raw + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    auto num = [&f](const std::string& path, auto accessor) {
      using T = std::remove_reference_t<decltype(accessor(std::declval<TrainConfig&>()))>;
      f.push_back(Field{
          path,
          [accessor](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(accessor(const_cast<TrainConfig&>(c)));
            else
              return std::to_string(accessor(const_cast<TrainConfig&>(c)));
          },
          [accessor, path](TrainConfig& c, const std::string& raw) {
            accessor(c) = parse_number<T>(path, raw);
          }});
    };
    auto boolean = [&f](const std::string& path, auto accessor) {
      f.push_back(Field{
          path,
          [accessor](const TrainConfig& c) {
            return accessor(const_cast<TrainConfig&>(c)) ? std::string("true")
                                                         : std::string("false");
          },
          [accessor, path](TrainConfig& c, const std::string& raw) {
            accessor(c) = parse_bool(path, raw);
          }});
    };

    num("run.seed", [](TrainConfig& c) -> std::uint64_t& { return c.seed; });
    num("run.total_steps", [](TrainConfig& c) -> long& { return c.total_steps; });
    num("run.warmup_steps", [](TrainConfig& c) -> long& { return c.warmup_steps; });
    num("run.updates_per_step", [](TrainConfig& c) -> double& { return c.updates_per_step; });
    num("run.eval_interval", [](TrainConfig& c) -> long& { return c.eval_interval; });
    num("run.eval_episodes", [](TrainConfig& c) -> int& { return c.eval_episodes; });
    num("run.checkpoint_interval", [](TrainConfig& c) -> long& { return c.checkpoint_interval; });
    boolean("run.log_wall_clock", [](TrainConfig& c) -> bool& { return c.log_wall_clock; });

    f.push_back(Field{
        "env.name",
        [](const TrainConfig& c) { return to_string(c.env); },
        [](TrainConfig& c, const std::string& raw) {
          try {
            c.env = env_name_from_string(raw);
          } catch (const std::exception&) {
            throw ConfigError("config key 'env.name': unknown environment '" + raw + "'");
          }
        }});
    num("env.episode_cap", [](TrainConfig& c) -> int& { return c.episode_cap; });

    num("replay.capacity", [](TrainConfig& c) -> std::size_t& { return c.replay_capacity; });
    f.push_back(Field{
        "replay.return_mode",
        [](const TrainConfig& c) {
          return std::string(c.return_mode == ReturnMode::undiscounted ? "undiscounted"
                                                                       : "discounted");
        },
        [](TrainConfig& c, const std::string& raw) {
          if (raw == "undiscounted") c.return_mode = ReturnMode::undiscounted;
          else if (raw == "discounted") c.return_mode = ReturnMode::discounted;
          else throw ConfigError("config key 'replay.return_mode': expected undiscounted|discounted");
        }});

    num("model.latent_dim", [](TrainConfig& c) -> int& { return c.latent_dim; });
    num("model.hidden_dim", [](TrainConfig& c) -> int& { return c.model_hidden_dim; });
    num("model.depth", [](TrainConfig& c) -> int& { return c.model_depth; });
    num("model.ensemble_size", [](TrainConfig& c) -> int& { return c.ensemble_size; });
    num("model.num_bins", [](TrainConfig& c) -> int& { return c.num_bins; });
    num("model.symlog_lo", [](TrainConfig& c) -> double& { return c.symlog_lo; });
    num("model.symlog_hi", [](TrainConfig& c) -> double& { return c.symlog_hi; });
    num("model.gamma", [](TrainConfig& c) -> double& { return c.hp.gamma; });
    num("model.horizon", [](TrainConfig& c) -> int& { return c.hp.horizon; });
    num("model.lambda", [](TrainConfig& c) -> double& { return c.hp.lambda; });
    num("model.tau_ema", [](TrainConfig& c) -> double& { return c.hp.tau_ema; });
    num("model.lr", [](TrainConfig& c) -> double& { return c.hp.lr; });
    num("model.batch_size", [](TrainConfig& c) -> int& { return c.hp.batch_size; });

    num("policy.beta", [](TrainConfig& c) -> double& { return c.beta; });
    f.push_back(Field{
        "policy.g_mode",
        [](const TrainConfig& c) { return c.g_mode; },
        [](TrainConfig& c, const std::string& raw) {
          if (raw != "r_max" && raw != "r_target")
            throw ConfigError("config key 'policy.g_mode': expected r_max|r_target");
          c.g_mode = raw;
        }});
    num("policy.alpha", [](TrainConfig& c) -> double& { return c.alpha; });
    f.push_back(Field{
        "policy.entropy_sign",
        [](const TrainConfig& c) { return c.entropy_sign; },
        [](TrainConfig& c, const std::string& raw) {
          if (raw != "bonus" && raw != "paper_literal")
            throw ConfigError("config key 'policy.entropy_sign': expected bonus|paper_literal");
          c.entropy_sign = raw;
        }});
    boolean("policy.bc_enabled", [](TrainConfig& c) -> bool& { return c.bc_enabled; });
    num("policy.hidden_dim", [](TrainConfig& c) -> int& { return c.policy_hidden_dim; });
    num("policy.depth", [](TrainConfig& c) -> int& { return c.policy_depth; });
    num("policy.lr", [](TrainConfig& c) -> double& { return c.policy_lr; });
    num("policy.log_std_min", [](TrainConfig& c) -> double& { return c.log_std_min; });
    num("policy.log_std_max", [](TrainConfig& c) -> double& { return c.log_std_max; });

    boolean("planner.plan_enabled", [](TrainConfig& c) -> bool& { return c.plan_enabled; });
    num("planner.plan_iters", [](TrainConfig& c) -> int& { return c.plan_iters; });
    num("planner.plan_samples", [](TrainConfig& c) -> int& { return c.plan_samples; });
    num("planner.plan_elites", [](TrainConfig& c) -> int& { return c.plan_elites; });
    num("planner.plan_policy_frac", [](TrainConfig& c) -> double& { return c.plan_policy_frac; });
    num("planner.plan_temperature", [](TrainConfig& c) -> double& { return c.plan_temperature; });
    num("planner.plan_sigma_floor", [](TrainConfig& c) -> double& { return c.plan_sigma_floor; });
    return f;
  }();
  return fields;
}

const Field& find_field(const std::string& path) {
  for (const Field& f : schema())
    if (f.path == path) return f;
  throw ConfigError("unknown config key '" + path + "'");
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig default_config() { return TrainConfig{}; }

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string path = section.empty() ? key : section + "." + key;
    find_field(path).set(cfg, value);
  }
  validate_config(cfg);
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + assignment);
  std::string path = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  find_field(path).set(cfg, value);
}

void validate_config(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.total_steps >= 0, "run.total_steps must be >= 0");
  require(cfg.warmup_steps >= 0 && cfg.warmup_steps <= cfg.total_steps,
          "run.warmup_steps must be in [0, run.total_steps]");
  require(cfg.updates_per_step >= 0.0, "run.updates_per_step must be >= 0");
  require(cfg.eval_interval > 0, "run.eval_interval must be positive");
  require(cfg.eval_episodes > 0, "run.eval_episodes must be positive");
  require(cfg.checkpoint_interval >= 0, "run.checkpoint_interval must be >= 0");
  require(cfg.episode_cap > 0, "env.episode_cap must be positive");
  require(cfg.replay_capacity > 0, "replay.capacity must be positive");
  require(cfg.latent_dim > 0, "model.latent_dim must be positive");
  require(cfg.model_hidden_dim > 0, "model.hidden_dim must be positive");
  require(cfg.model_depth >= 1, "model.depth must be >= 1");
  require(cfg.ensemble_size >= 1, "model.ensemble_size must be >= 1");
  require(cfg.num_bins >= 2, "model.num_bins must be >= 2");
  require(cfg.symlog_lo < cfg.symlog_hi, "model.symlog_lo must be < model.symlog_hi");
  try {
    cfg.hp.validate();
    cfg.policy_config().validate();
    cfg.plan_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const Field& f : schema()) {
    std::string sec = f.path.substr(0, f.path.find('.'));
    std::string key = f.path.substr(f.path.find('.') + 1);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << key << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  std::string text = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace mbrl
