// Command-line front end: experiment grids, summaries, sync timelines,
// gradient checks and value-iteration oracles.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asdqn/asdqn.hpp"
#include "asdqn/harness/config.hpp"
#include "asdqn/harness/runner.hpp"
#include "asdqn/harness/summary.hpp"
#include "asdqn/harness/timeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

using asdqn::harness::json;
namespace fs = std::filesystem;

int cmd_run(const std::string& config_path, bool force, int workers, const std::string& output) {
  asdqn::harness::ExperimentConfig cfg;
  try {
    cfg = asdqn::harness::load_config(config_path);
  } catch (const asdqn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    const auto result = asdqn::harness::run_experiment(
        cfg, force, workers, output.empty() ? std::nullopt : std::optional<fs::path>(output));
    for (const auto& c : result.cells) {
      std::cout << c.cell.name() << ": " << (c.ok ? "ok" : "FAILED (" + c.error + ")") << '\n';
    }
    std::cout << "output: " << result.directory.string() << '\n';
    return result.status == asdqn::harness::RunStatus::ok ? kExitOk : kExitRuntime;
  } catch (const asdqn::harness::OutputExistsError& e) {
    std::cerr << "refusing to run: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_summarize(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto summary = asdqn::harness::summarize(paths);
  for (const auto& [dir, why] : summary.errors) std::cerr << "skipped " << dir.string() << ": " << why << '\n';
  if (summary.rows.empty()) {
    std::cerr << "no usable run directories\n";
    return kExitRuntime;
  }
  try {
    asdqn::harness::write_summary_csv(summary, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  std::cout << "summary: " << out << '\n';
  return summary.errors.empty() ? kExitOk : kExitRuntime;
}

int cmd_timeline(const std::string& run_dir) {
  try {
    std::cout << asdqn::harness::sync_timeline(run_dir).string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::vector<int> parse_dims(const std::string& text) {
  std::vector<int> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) dims.push_back(std::stoi(item));
  return dims;
}

int cmd_grad_check(const std::string& dims_text, int trials, int batch_size, double gamma, double h, double tol,
                   std::uint64_t seed) {
  std::vector<int> dims;
  try {
    dims = parse_dims(dims_text);
    (void)asdqn::ParamSet(dims);
  } catch (const std::exception& e) {
    std::cerr << "invalid --dims '" << dims_text << "': " << e.what() << '\n';
    return kExitValidation;
  }
  double worst = 0.0;
  double worst_smooth = 0.0;
  std::size_t crossings = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto params = asdqn::init_params(dims, asdqn::derive_seed(seed, "grad-check.online", trial));
    const auto target = asdqn::init_params(dims, asdqn::derive_seed(seed, "grad-check.target", trial));
    asdqn::Rng rng = asdqn::make_rng(seed, "grad-check.batch", trial);
    asdqn::Batch batch;
    for (int j = 0; j < batch_size; ++j) {
      batch.push_back({static_cast<int>(asdqn::uniform_index(rng, dims.front())),
                       static_cast<int>(asdqn::uniform_index(rng, dims.back())), 2.0 * asdqn::uniform01(rng) - 1.0,
                       static_cast<int>(asdqn::uniform_index(rng, dims.front())), asdqn::uniform01(rng) < 0.25});
    }
    const auto report = asdqn::grad_check_report(params, target, batch, gamma, h,
                                                 asdqn::loss_and_grad(params, target, batch, gamma).grads);
    worst = std::max(worst, report.max_rel_error);
    worst_smooth = std::max(worst_smooth, report.max_rel_error_smooth);
    crossings += report.kink_crossings;
  }
  std::cout << "max relative error over " << trials << " trials: " << std::scientific << std::setprecision(3) << worst
            << (worst < tol ? "  (ok)" : "  (ABOVE TOLERANCE)") << '\n';
  std::cout << "parameters whose step crosses a ReLU kink: " << crossings
            << "; max over the rest: " << worst_smooth << '\n';
  return worst < tol ? kExitOk : kExitRuntime;
}

int cmd_oracle(const std::string& path, std::optional<double> gamma_flag, double tol) {
  std::string family;
  asdqn::EnvParams params;
  double gamma = 0.9;
  try {
    std::ifstream in(path);
    if (!in) throw asdqn::ConfigError("<file>", "cannot open " + path);
    json doc = json::parse(in, nullptr, true, true);
    if (doc.contains("env")) {
      const auto cfg = asdqn::harness::parse_config(doc);
      family = cfg.env.family;
      params = cfg.env.params;
      gamma = cfg.agent.gamma;
    } else {
      family = doc.value("family", std::string("gridworld"));
      if (doc.contains("params")) {
        for (auto it = doc["params"].begin(); it != doc["params"].end(); ++it) params[it.key()] = it.value().get<double>();
      }
    }
    if (gamma_flag) gamma = *gamma_flag;
    const auto env = asdqn::make_env(family, params, 0);
    const auto q = asdqn::value_iteration(env.enumerate_mdp(), gamma, tol);
    std::cout << "# " << family << " gamma=" << gamma << " tol=" << tol << '\n';
    std::cout << "state,greedy_action,v";
    for (int a = 0; a < q.num_actions(); ++a) std::cout << ",q" << a;
    std::cout << '\n';
    for (int s = 0; s < q.num_states(); ++s) {
      std::cout << s << ',' << q.greedy(s) << ',' << asdqn::harness::format_double(q.max(s));
      for (int a = 0; a < q.num_actions(); ++a) std::cout << ',' << asdqn::harness::format_double(q(s, a));
      std::cout << '\n';
    }
    return kExitOk;
  } catch (const asdqn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning laboratory with fixed and adaptive target synchronization"};
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  int workers = 1;
  std::string output;
  auto* run = app.add_subcommand("run", "Run a (sync variant x seed) experiment grid");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_flag("--force", force, "Overwrite an existing experiment in the output directory");
  run->add_option("--workers", workers, "Cells to run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--output", output, "Override output.directory");

  std::vector<std::string> summary_dirs;
  std::string summary_out = "summary.csv";
  auto* summarize = app.add_subcommand("summarize", "Aggregate eval returns across runs");
  summarize->add_option("dirs", summary_dirs, "Run directories or experiment directories")->required();
  summarize->add_option("-o,--out", summary_out, "Summary CSV path");

  std::string run_dir;
  auto* timeline = app.add_subcommand("timeline", "Write timeline.csv of sync decisions for one run");
  timeline->add_option("run_dir", run_dir, "Run directory")->required();

  std::string dims = "4,8,3";
  int trials = 10;
  int batch = 16;
  double gamma = 0.9;
  double h = 1e-5;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  auto* grad = app.add_subcommand("grad-check", "Compare backprop gradients to central differences");
  grad->add_option("--dims", dims, "Comma-separated layer widths, input first");
  grad->add_option("--trials", trials, "Random networks to check")->check(CLI::PositiveNumber);
  grad->add_option("--batch", batch, "Transitions per batch")->check(CLI::PositiveNumber);
  grad->add_option("--gamma", gamma, "Discount");
  grad->add_option("--step", h, "Finite-difference step h");
  grad->add_option("--tol", tol, "Maximum allowed relative error");
  grad->add_option("--seed", seed, "Seed");

  std::string env_config;
  std::optional<double> oracle_gamma;
  double oracle_tol = 1e-10;
  auto* oracle = app.add_subcommand("oracle", "Print Q* from value iteration for an environment");
  oracle->add_option("env_config", env_config, "Experiment config or {family, params} JSON")->required();
  oracle->add_option("--gamma", oracle_gamma, "Discount (default: agent.gamma or 0.9)");
  oracle->add_option("--tol", oracle_tol, "Value-iteration tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*run) return cmd_run(config_path, force, workers, output);
  if (*summarize) return cmd_summarize(summary_dirs, summary_out);
  if (*timeline) return cmd_timeline(run_dir);
  if (*grad) return cmd_grad_check(dims, trials, batch, gamma, h, tol, seed);
  if (*oracle) return cmd_oracle(env_config, oracle_gamma, oracle_tol);
  return kExitValidation;
}
