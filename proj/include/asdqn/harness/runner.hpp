#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "asdqn/agent.hpp"
#include "asdqn/harness/config.hpp"
#include "asdqn/harness/format.hpp"

#ifndef ASDQN_BUILD_ID
#define ASDQN_BUILD_ID "unknown"
#endif

namespace asdqn::harness {

namespace fs = std::filesystem;

inline constexpr int kCsvVersion = 1;
inline constexpr const char* kIterationsHeader =
    "iteration,train_return_mean,eval_return_mean,eval_return_var,loss_mean,sync_attempts,syncs_taken,seconds";

struct IterationReport {
  int iteration = 0;
  std::optional<double> train_return_mean;
  double eval_return_mean = 0.0;
  std::optional<double> eval_return_var;
  std::optional<double> loss_mean;
  std::int64_t sync_attempts = 0;
  std::int64_t syncs_taken = 0;
  std::optional<double> seconds;
};

inline std::string to_csv_row(const IterationReport& r) {
  return std::to_string(r.iteration) + "," + format_optional(r.train_return_mean) + "," +
         format_double(r.eval_return_mean) + "," + format_optional(r.eval_return_var) + "," +
         format_optional(r.loss_mean) + "," + std::to_string(r.sync_attempts) + "," + std::to_string(r.syncs_taken) +
         "," + format_optional(r.seconds);
}

inline json to_json(const SyncEvent& ev) {
  return {{"step", ev.step},
          {"decision", ev.synced ? "synced" : "skipped"},
          {"avg_old", ev.avg_old ? json(*ev.avg_old) : json(nullptr)},
          {"avg_new", ev.avg_new ? json(*ev.avg_new) : json(nullptr)}};
}

struct Cell {
  SyncKind kind;
  std::uint64_t seed;

  std::string name() const { return std::string(to_string(kind)) + "-seed" + std::to_string(seed); }
};

struct CellOutcome {
  Cell cell;
  bool ok = true;
  std::string error;
  std::vector<IterationReport> reports;
};

inline std::vector<Cell> grid_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (SyncKind k : cfg.sync.kinds) {
    for (std::uint64_t s : cfg.run.seeds) cells.push_back({k, s});
  }
  return cells;
}

namespace detail {

template <typename Backend>
void run_iterations(const ExperimentConfig& cfg, const Cell& cell, Backend backend, const fs::path& dir,
                    CellOutcome& outcome) {
  const bool write_csv = std::find(cfg.output.formats.begin(), cfg.output.formats.end(), "csv") != cfg.output.formats.end();
  const bool write_jsonl =
      std::find(cfg.output.formats.begin(), cfg.output.formats.end(), "jsonl") != cfg.output.formats.end();

  Environment train_env = make_env(cfg.env.family, cfg.env.params, derive_seed(cell.seed, "env.train"));
  Agent<Backend> agent(std::move(backend), cfg.train_config(cell.kind, cell.seed));

  std::ofstream csv;
  if (write_csv) {
    csv.open(dir / "iterations.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "iterations.csv").string());
    csv << kIterationsHeader << '\n';
  }

  auto flush_events = [&] {
    if (!write_jsonl) return;
    std::ofstream ev(dir / "sync_events.jsonl", std::ios::binary | std::ios::trunc);
    if (!ev) throw std::runtime_error("cannot write " + (dir / "sync_events.jsonl").string());
    for (const auto& e : agent.log().sync_events) ev << to_json(e).dump() << '\n';
  };

  try {
    for (int it = 1; it <= cfg.run.iterations; ++it) {
      const auto started = std::chrono::steady_clock::now();
      const PhaseStats stats = agent.run(train_env, cfg.run.train_steps_per_iteration);

      Environment eval_env =
          make_env(cfg.env.family, cfg.env.params, derive_seed(cell.seed, "env.eval", static_cast<std::uint64_t>(it)));
      const EvalResult eval =
          evaluate([&](int s) { return agent.backend().q_values(s); }, eval_env, cfg.run.eval_episodes,
                   cfg.run.eval_epsilon, derive_seed(cell.seed, "eval", static_cast<std::uint64_t>(it)));

      IterationReport r;
      r.iteration = it;
      if (!stats.episode_returns.empty()) r.train_return_mean = mean_of(stats.episode_returns);
      r.eval_return_mean = eval.mean_return;
      r.eval_return_var = sample_variance(eval.returns);
      if (stats.loss_count > 0) r.loss_mean = stats.loss_sum / static_cast<double>(stats.loss_count);
      r.sync_attempts = stats.sync_attempts;
      r.syncs_taken = stats.syncs_taken;
      if (cfg.output.wall_clock) {
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      }
      outcome.reports.push_back(r);
      if (write_csv) csv << to_csv_row(r) << '\n' << std::flush;
    }
  } catch (...) {
    flush_events();
    throw;
  }
  flush_events();
}

}  // namespace detail

/// Trains and evaluates one (variant, seed) cell, writing iterations.csv,
/// sync_events.jsonl and a per-run manifest.json into `dir`. Failures are
/// captured in the outcome (and manifest) rather than thrown.
inline CellOutcome run_cell(const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
  CellOutcome outcome{cell, true, {}, {}};
  try {
    fs::create_directories(dir);
    Environment probe = make_env(cfg.env.family, cfg.env.params, 0);
    const std::uint64_t init_seed = derive_seed(cell.seed, "agent.init");
    if (cfg.agent.backend == BackendKind::neural) {
      std::vector<int> dims{probe.num_states()};
      dims.insert(dims.end(), cfg.agent.hidden_layers.begin(), cfg.agent.hidden_layers.end());
      dims.push_back(probe.num_actions());
      detail::run_iterations(cfg, cell, NeuralBackend(dims, cfg.agent.optimizer, init_seed), dir, outcome);
    } else {
      detail::run_iterations(cfg, cell, TabularBackend(probe.num_states(), probe.num_actions(), cfg.agent.tabular),
                             dir, outcome);
    }
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }

  json manifest = {{"variant", to_string(cell.kind)},
                   {"seed", cell.seed},
                   {"status", outcome.ok ? "ok" : "failed"},
                   {"build", ASDQN_BUILD_ID},
                   {"csv_version", kCsvVersion},
                   {"config", to_json(cfg)}};
  if (!outcome.ok) manifest["error"] = outcome.error;
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream(dir / "manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << '\n';
  return outcome;
}

enum class RunStatus { ok = 0, cell_failures = 2 };

class OutputExistsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentResult {
  fs::path directory;
  std::vector<CellOutcome> cells;
  RunStatus status = RunStatus::ok;
};

/// Runs the (variant x seed) grid with up to `workers` cells in flight.
/// Refuses to touch an output directory holding a previous experiment
/// manifest unless `force` is set, in which case that experiment's cell
/// directories are replaced.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool force = false, int workers = 1,
                                       std::optional<fs::path> output_override = std::nullopt) {
  const fs::path out = output_override ? *output_override : fs::path(cfg.output.directory);
  const auto cells = grid_cells(cfg);
  if (fs::exists(out / "manifest.json")) {
    if (!force) {
      throw OutputExistsError("output directory " + out.string() +
                              " already holds an experiment; pass --force to overwrite it");
    }
    for (const auto& c : cells) fs::remove_all(out / c.name());
    fs::remove(out / "manifest.json");
  }
  fs::create_directories(out);

  ExperimentResult result{out, std::vector<CellOutcome>(cells.size()), RunStatus::ok};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      result.cells[i] = run_cell(cfg, cells[i], out / cells[i].name());
    }
  };
  const int threads = std::clamp<int>(workers, 1, static_cast<int>(cells.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  json cell_list = json::array();
  json failures = json::array();
  for (const auto& c : result.cells) {
    cell_list.push_back({{"variant", to_string(c.cell.kind)},
                         {"seed", c.cell.seed},
                         {"directory", c.cell.name()},
                         {"status", c.ok ? "ok" : "failed"}});
    if (!c.ok) {
      failures.push_back({{"directory", c.cell.name()}, {"error", c.error}});
      result.status = RunStatus::cell_failures;
    }
  }
  json manifest = {{"build", ASDQN_BUILD_ID},
                   {"csv_version", kCsvVersion},
                   {"iterations_columns", kIterationsHeader},
                   {"config", to_json(cfg)},
                   {"cells", cell_list},
                   {"failures", failures}};
  std::ofstream(out / "manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << '\n';
  return result;
}

}  // namespace asdqn::harness
