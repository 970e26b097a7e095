#include "mbrl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mbrl/config.hpp"
#include "mbrl/trainer.hpp"

namespace mbrl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string build_identifier() {
  return std::string("g++ ") + __VERSION__;
}

namespace {

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

TrainConfig load_config(const std::string& config_path,
                        const std::vector<std::string>& overrides,
                        std::uint64_t seed, bool seed_given) {
  TrainConfig cfg =
      config_path.empty() ? default_config() : parse_config_file(config_path);
  for (const std::string& ov : overrides) apply_override(cfg, ov);
  if (seed_given) cfg.seed = seed;
  validate_config(cfg);
  return cfg;
}

void write_manifest(const std::string& command, const std::string& config_path,
                    const TrainConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path.empty() ? ordered_json(nullptr) : ordered_json(config_path);
  j["config"] = serialize_config(cfg);
  j["config_hash"] = config_hash(cfg);
  j["out_dir"] = out_dir;
  j["build"] = build_identifier();
  j["started"] = timestamp_utc();
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + out_dir);
  os << j.dump(2) << "\n";
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides, std::uint64_t seed,
              bool seed_given, const std::string& out_dir, bool dry_run,
              const std::string& resume, bool force) {
  TrainConfig cfg = load_config(config_path, overrides, seed, seed_given);
  write_manifest("train", config_path, cfg, out_dir);
  if (dry_run) {
    std::cout << "config ok; dry run, not training\n";
    return 0;
  }
  RunSummary summary;
  if (!resume.empty()) {
    Trainer t = Trainer::load_checkpoint(resume, &cfg, force);
    summary = t.run(out_dir);
  } else {
    Trainer t(cfg);
    summary = t.run(out_dir);
  }
  std::cout << summary.to_json() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             const std::string& dump_path) {
  Trainer t = Trainer::load_checkpoint(checkpoint);
  EvalStats stats = t.evaluate(episodes, seed);
  if (!dump_path.empty()) {
    std::ofstream os(dump_path);
    if (!os) throw std::runtime_error("cannot write episode dump: " + dump_path);
    for (std::size_t i = 0; i < stats.episodes.size(); ++i)
      dump_episode_line(os, i, stats.episodes[i]);
  }
  ordered_json j;
  j["checkpoint"] = checkpoint;
  j["episodes"] = episodes;
  j["seed"] = seed;
  j["return_mean"] = stats.return_mean;
  j["return_std"] = stats.return_std;
  j["upright_mean"] = stats.upright.mean;
  j["upright_median"] = stats.upright.q50;
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

GridAxis parse_axis(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("grid axis must look like key=v1,v2,...: " + spec);
  GridAxis axis;
  axis.key = spec.substr(0, eq);
  std::string rest = spec.substr(eq + 1);
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) axis.values.push_back(item);
  if (axis.values.empty()) throw ConfigError("grid axis has no values: " + spec);
  return axis;
}

struct Cell {
  std::vector<std::pair<std::string, std::string>> assignment;
  std::uint64_t seed = 0;
  std::string dir_name;
};

int cmd_ablate(const std::string& config_path,
               const std::vector<std::string>& overrides,
               const std::vector<std::string>& grid_specs,
               const std::string& seeds_arg, const std::string& out_dir,
               int jobs) {
  std::vector<GridAxis> axes;
  for (const std::string& g : grid_specs) axes.push_back(parse_axis(g));
  std::vector<std::uint64_t> seeds;
  {
    std::stringstream ss(seeds_arg);
    std::string item;
    while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ConfigError("ablate: --seeds must list at least one seed");

  // Cartesian product in axis order, seeds fastest.
  std::vector<Cell> cells;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    for (std::uint64_t s : seeds) {
      Cell cell;
      std::ostringstream name;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        cell.assignment.emplace_back(axes[a].key, axes[a].values[idx[a]]);
        name << axes[a].key << "=" << axes[a].values[idx[a]] << "__";
      }
      name << "seed=" << s;
      cell.seed = s;
      cell.dir_name = name.str();
      cells.push_back(std::move(cell));
    }
    std::size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == axes.size()) break;
  }
  if (axes.empty() && cells.empty()) {
    for (std::uint64_t s : seeds) {
      Cell cell;
      cell.seed = s;
      cell.dir_name = "seed=" + std::to_string(s);
      cells.push_back(std::move(cell));
    }
  }

  // Validate every cell before launching any.
  for (const Cell& cell : cells) {
    TrainConfig cfg = load_config(config_path, overrides, cell.seed, true);
    for (const auto& [k, v] : cell.assignment) apply_override(cfg, k + "=" + v);
    validate_config(cfg);
  }

  TrainConfig base = load_config(config_path, overrides, seeds[0], true);
  write_manifest("ablate", config_path, base, out_dir);

  struct CellOutcome {
    bool ok = false;
    std::string error;
    RunSummary summary;
  };
  std::vector<CellOutcome> outcomes(cells.size());

  std::atomic<std::size_t> next{0};
  int n_threads = std::max(1, jobs);
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      try {
        TrainConfig cfg = load_config(config_path, overrides, cell.seed, true);
        for (const auto& [k, v] : cell.assignment) apply_override(cfg, k + "=" + v);
        validate_config(cfg);
        std::string cell_dir = (fs::path(out_dir) / cell.dir_name).string();
        write_manifest("train", config_path, cfg, cell_dir);
        Trainer t(cfg);
        outcomes[i].summary = t.run(cell_dir);
        outcomes[i].ok = true;
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Comparison table, machine- and human-readable.
  ordered_json table = ordered_json::array();
  std::ostringstream txt;
  txt << std::left << std::setw(44) << "cell" << std::setw(10) << "seed"
      << std::setw(18) << "steps_to_target" << std::setw(22)
      << "final_eval_return" << "status\n";
  std::size_t failures = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    ordered_json row;
    for (const auto& [k, v] : cells[i].assignment) row[k] = v;
    row["seed"] = cells[i].seed;
    if (outcomes[i].ok) {
      const RunSummary& s = outcomes[i].summary;
      row["steps_to_target"] =
          s.steps_to_target >= 0 ? ordered_json(s.steps_to_target) : ordered_json(nullptr);
      row["final_eval_return_mean"] = s.final_eval_return_mean;
      row["status"] = "ok";
      txt << std::left << std::setw(44) << cells[i].dir_name << std::setw(10)
          << cells[i].seed << std::setw(18)
          << (s.steps_to_target >= 0 ? std::to_string(s.steps_to_target)
                                     : std::string("not reached"))
          << std::setw(22) << s.final_eval_return_mean << "ok\n";
    } else {
      row["status"] = "failed";
      row["error"] = outcomes[i].error;
      failures += 1;
      txt << std::left << std::setw(44) << cells[i].dir_name << std::setw(10)
          << cells[i].seed << std::setw(18) << "-" << std::setw(22) << "-"
          << ("failed: " + outcomes[i].error) << "\n";
    }
    table.push_back(std::move(row));
  }
  {
    std::ofstream os(fs::path(out_dir) / "table.json");
    os << table.dump(2) << "\n";
    std::ofstream ot(fs::path(out_dir) / "table.txt");
    ot << txt.str();
  }
  std::cout << txt.str();
  return failures == cells.size() && !cells.empty() ? 1 : 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Model-based RL lab with return-weighted self-imitation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume, checkpoint, dump_path, seeds_arg;
  std::vector<std::string> overrides, grids;
  std::uint64_t seed = 0;
  bool dry_run = false, force = false;
  int episodes = 5, jobs = 1;

  auto* train = app.add_subcommand("train", "Train a run");
  train->add_option("--config", config_path, "Config file (INI-style)");
  auto* seed_opt = train->add_option("--seed", seed, "Run seed");
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--override", overrides, "Config override section.key=value");
  train->add_flag("--dry-run", dry_run, "Validate config and write manifest only");
  train->add_option("--resume", resume, "Resume from a checkpoint file");
  train->add_flag("--force", force, "Ignore config-hash mismatch on resume");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes");
  eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--dump-episodes", dump_path, "Write per-episode JSONL");

  auto* ablate = app.add_subcommand("ablate", "Run a config grid");
  ablate->add_option("--config", config_path, "Config file (INI-style)");
  ablate->add_option("--grid", grids, "Axis key=v1,v2,... (repeatable)");
  ablate->add_option("--seeds", seeds_arg, "Comma-separated seeds")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--override", overrides, "Config override applied to all cells");
  ablate->add_option("--jobs", jobs, "Parallel cells");

  std::vector<std::string> argv_copy = args;
  std::vector<char*> argv;
  argv.reserve(argv_copy.size() + 1);
  static std::string prog = "mbrl";
  argv.push_back(prog.data());
  for (auto& a : argv_copy) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed())
      return cmd_train(config_path, overrides, seed, seed_opt->count() > 0,
                       out_dir, dry_run, resume, force);
    if (eval->parsed()) return cmd_eval(checkpoint, episodes, seed, dump_path);
    if (ablate->parsed())
      return cmd_ablate(config_path, overrides, grids, seeds_arg, out_dir, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace mbrl
