// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "asdqn/asdqn.hpp"
#include "asdqn/harness/config.hpp"
#include "asdqn/harness/runner.hpp"
#include "asdqn/harness/summary.hpp"

using namespace asdqn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double max_seconds;
  std::function<Outcome()> check;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Environment grid4(std::uint64_t seed) { return make_env("gridworld", {{"rows", 4}, {"cols", 4}, {"slip", 0.0}}, seed); }

RewardQueue queue_of(const std::vector<double>& rewards) {
  RewardQueue q(static_cast<int>(rewards.size() / 2));
  for (double r : rewards) q.push(r);
  return q;
}

Outcome weight_vectors() {
  int bad = 0;
  double worst_sum = 0.0;
  for (int n = 1; n <= 10'000; ++n) {
    const auto w = make_weights(n);
    bool ok = w.n() == static_cast<std::size_t>(n);
    for (std::size_t i = 1; ok && i < w.n(); ++i) ok = w[i - 1] <= w[i];
    const double err = std::abs(std::accumulate(w.w.begin(), w.w.end(), 0.0) - 1.0);
    worst_sum = std::max(worst_sum, err);
    bad += !ok || err > 1e-12;
  }
  return {bad == 0, fmt("%d bad n, max |sum - 1| = %.2e", bad, worst_sum)};
}

Outcome decision_invariance() {
  Rng rng = make_rng(2024, "acceptance.invariance");
  int violations = 0;
  int syncs = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 63));
    std::vector<double> rewards(static_cast<std::size_t>(2 * n));
    for (auto& r : rewards) r = 20.0 * uniform01(rng) - 10.0;
    const auto policy = SyncPolicy::adaptive(1, n);
    const bool base = should_sync(policy, 1, queue_of(rewards));
    syncs += base;
    for (int k = 0; k < 10; ++k) {
      double a = 0.0;
      while (a <= 0.0) a = 10.0 * uniform01(rng);
      const double b = 200.0 * uniform01(rng) - 100.0;
      std::vector<double> moved(rewards.size());
      for (std::size_t i = 0; i < rewards.size(); ++i) moved[i] = a * rewards[i] + b;
      violations += should_sync(policy, 1, queue_of(moved)) != base;
    }
  }
  return {violations == 0, fmt("%d violations over 10000 transforms (%d/1000 base decisions sync)", violations, syncs)};
}

Outcome worked_decisions() {
  const auto policy = SyncPolicy::adaptive(1, 3);
  const auto up = evaluate_sync(policy, 1, queue_of({1, 2, 3, 4, 5, 6}));
  const auto down = evaluate_sync(policy, 1, queue_of({6, 5, 4, 3, 2, 1}));
  if (!up.averages || !down.averages) return {false, "no averages reported for a full queue"};
  const double err = std::max({std::abs(up.averages->avg_old - 14.0 / 6), std::abs(up.averages->avg_new - 32.0 / 6),
                               std::abs(down.averages->avg_old - 28.0 / 6),
                               std::abs(down.averages->avg_new - 10.0 / 6)});
  const bool ok = err <= 1e-12 && !up.sync && down.sync;
  return {ok, fmt("max avg error %.2e; increasing -> %s, decreasing -> %s", err, up.sync ? "sync" : "keep",
                  down.sync ? "sync" : "keep")};
}

// Every weight and bias uniform in +-1/sqrt(fan_in).
ParamSet random_params(const std::vector<int>& dims, Rng& rng) {
  ParamSet p(dims);
  for (auto& layer : p.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * (2.0 * uniform01(rng) - 1.0);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = scale * (2.0 * uniform01(rng) - 1.0);
  }
  return p;
}

Outcome gradient_exactness() {
  const std::array<std::vector<int>, 3> shapes{{{4, 8, 3}, {16, 32, 32, 4}, {8, 64, 64, 2}}};
  Rng rng = make_rng(7, "acceptance.grad");
  double worst = 0.0;
  double worst_smooth = 0.0;
  int nets_crossing = 0;
  for (int net = 0; net < 100; ++net) {
    const auto& dims = shapes[uniform_index(rng, shapes.size())];
    const auto params = random_params(dims, rng);
    const auto target = random_params(dims, rng);
    Batch batch;
    for (int j = 0; j < 16; ++j) {
      batch.push_back({static_cast<int>(uniform_index(rng, dims.front())),
                       static_cast<int>(uniform_index(rng, dims.back())), 2.0 * uniform01(rng) - 1.0,
                       static_cast<int>(uniform_index(rng, dims.front())), uniform01(rng) < 0.25});
    }
    const auto report = grad_check_report(params, target, batch, 0.9, 1e-5,
                                          loss_and_grad(params, target, batch, 0.9).grads);
    worst = std::max(worst, report.max_rel_error);
    worst_smooth = std::max(worst_smooth, report.max_rel_error_smooth);
    if (report.kink_crossings > 0) ++nets_crossing;
  }
  return {worst < 1e-6, fmt("max relative error %.3e over 100 nets; %d nets have a +-h step crossing a ReLU kink, "
                            "max over non-crossing steps %.3e",
                            worst, nets_crossing, worst_smooth)};
}

Outcome tabular_convergence() {
  constexpr double gamma = 0.9;
  auto env = grid4(11);
  const auto q_star = value_iteration(env.enumerate_mdp(), gamma, 1e-10);
  TabularRunConfig cfg;
  cfg.learn = {1.0, gamma, AlphaDecay::inverse_count};
  cfg.explore = ExplorationSchedule::constant(1.0);
  cfg.sync = SyncPolicy::fixed(100);
  cfg.steps = 200'000;
  cfg.seed = 1;
  const auto run = tabular_dqn_train(env, cfg);
  const double err = max_abs_diff(run.q, q_star);
  return {err < 0.01, fmt("max|Q - Q*| = %.4f (gamma %.2f, alpha 1/N, uniform behaviour policy)", err, gamma)};
}

Outcome replay_uniformity() {
  ReplayBuffer<> buf(100);
  for (int i = 0; i < 100; ++i) buf.push({i, 0, 0.0, 0, false});
  Rng rng = make_rng(3, "acceptance.replay");
  std::vector<double> counts(100, 0.0);
  for (const auto& t : buf.sample(100'000, rng)) counts[static_cast<std::size_t>(t.s)] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(99), chi2));

  ReplayBuffer<> fifo(1000);
  for (int i = 0; i < 1'000'000; ++i) fifo.push({i, 0, 0.0, 0, false});
  bool exact = fifo.size() == 1000;
  const auto held = fifo.contents();
  for (std::size_t i = 0; exact && i < held.size(); ++i) exact = held[i].s == 999'000 + static_cast<int>(i);
  return {p > 0.001 && exact, fmt("chi-square p = %.4f; FIFO contents %s", p, exact ? "exact" : "WRONG")};
}

Outcome c1_collapse() {
  TabularRunConfig cfg;
  cfg.learn = {0.2, 0.9, AlphaDecay::constant};
  cfg.explore = {1.0, 0.1, 5000};
  cfg.sync = SyncPolicy::fixed(1);
  cfg.steps = 10'000;
  cfg.seed = 17;
  auto env = grid4(4);
  const auto run = tabular_dqn_train(env, cfg);

  auto ref_env = grid4(4);
  QTable q(16, 4);
  Rng rng = make_rng(cfg.seed, "agent.explore");
  auto obs = ref_env.reset();
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const int a = select_action(q.row(obs.state_id), epsilon_at(cfg.explore, step - 1), rng);
    auto res = ref_env.step(a);
    q_update(q, {obs.state_id, a, res.reward, res.obs.state_id, res.terminal}, q, cfg.learn);
    obs = res.done ? ref_env.reset() : res.obs;
  }
  const bool same = run.q == q;
  return {same, same ? "tables bitwise identical after 10^4 steps" : fmt("max diff %.3e", max_abs_diff(run.q, q))};
}

Outcome end_to_end() {
  std::vector<int> reached(3, 0);
  std::vector<double> seconds(3, 0.0);
  std::vector<std::thread> pool;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    pool.emplace_back([&, seed] {
      const auto started = std::chrono::steady_clock::now();
      auto env = grid4(derive_seed(seed, "env.train"));
      TrainConfig cfg;
      cfg.total_steps = 50'000;
      cfg.max_episode_steps = 100;
      cfg.sync = SyncPolicy::fixed(500);
      cfg.seed = seed;
      const auto result = train(env, NeuralBackend({16, 64, 64, 4}, OptimizerConfig{}, derive_seed(seed, "agent.init")),
                                cfg);
      auto eval_env = grid4(derive_seed(seed, "env.eval"));
      Rng rng = make_rng(seed, "eval.explore");
      int goals = 0;
      for (int episode = 0; episode < 100; ++episode) {
        auto obs = eval_env.reset();
        while (true) {
          const auto q = q_row(result.backend.online(), obs.state_id);
          const auto res = eval_env.step(select_action(q, 0.0, rng));
          if (res.terminal) ++goals;
          if (res.done) break;
          obs = res.obs;
        }
      }
      reached[seed - 1] = goals;
      seconds[seed - 1] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    });
  }
  for (auto& t : pool) t.join();
  const int good = static_cast<int>(std::count_if(reached.begin(), reached.end(), [](int g) { return g >= 95; }));
  const double slowest = *std::max_element(seconds.begin(), seconds.end());
  return {good >= 2 && slowest < 300.0, fmt("goals reached per seed %d/%d/%d of 100; slowest seed %.0f s", reached[0],
                                             reached[1], reached[2], slowest)};
}

Outcome stability_comparison() {
  const fs::path out = fs::temp_directory_path() / "asdqn_acceptance_stability";
  fs::remove_all(out);
  auto cfg = harness::parse_config(harness::json::parse(R"({
    "env": {"family": "gridworld", "params": {"rows": 4, "cols": 4, "slip": 0.0}},
    "agent": {"backend": "neural", "hidden_layers": [64, 64], "max_episode_steps": 100},
    "sync": {"kind": ["fixed", "adaptive"], "C": 25},
    "run": {"seeds": [1, 2, 3, 4, 5]}
  })"));
  cfg.output.directory = out.string();
  const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto result = harness::run_experiment(cfg, false, workers);
  if (result.status != harness::RunStatus::ok) return {false, "at least one cell failed"};

  std::vector<double> fixed_final, adaptive_final;
  std::vector<std::int64_t> fixed_syncs, adaptive_syncs;
  for (const auto& cell : result.cells) {
    std::vector<double> evals;
    std::int64_t syncs = 0;
    for (const auto& r : cell.reports) {
      evals.push_back(r.eval_return_mean);
      syncs += r.syncs_taken;
    }
    const double final10 = std::accumulate(evals.end() - 10, evals.end(), 0.0) / 10.0;
    (cell.cell.kind == SyncKind::fixed ? fixed_final : adaptive_final).push_back(final10);
    (cell.cell.kind == SyncKind::fixed ? fixed_syncs : adaptive_syncs).push_back(syncs);
  }
  bool fewer = true;
  for (std::size_t i = 0; i < fixed_syncs.size(); ++i) fewer = fewer && adaptive_syncs[i] < fixed_syncs[i];
  const double med_fixed = median(fixed_final);
  const double med_adaptive = median(adaptive_final);
  fs::remove_all(out);
  return {med_adaptive >= med_fixed && fewer,
          fmt("median final-10 return adaptive %.4f vs fixed %.4f; syncs adaptive %lld vs fixed %lld", med_adaptive,
              med_fixed, static_cast<long long>(std::accumulate(adaptive_syncs.begin(), adaptive_syncs.end(), 0LL)),
              static_cast<long long>(std::accumulate(fixed_syncs.begin(), fixed_syncs.end(), 0LL)))};
}

Outcome warmup_equivalence() {
  // 2n = 60 rewards fill the queue at step 60; learning starts at step 32.
  // Every step before the fill must agree bit for bit.
  TrainConfig cfg;
  cfg.max_episode_steps = 100;
  cfg.batch_size = 16;
  cfg.min_fill = 32;
  cfg.explore = {1.0, 0.1, 500};
  cfg.seed = 99;
  cfg.sync = SyncPolicy::fixed(10);
  OptimizerConfig opt;
  Agent<NeuralBackend> fixed(NeuralBackend({16, 32, 4}, opt, 5), cfg);
  cfg.sync = SyncPolicy::adaptive(10, 30);
  Agent<NeuralBackend> adaptive(NeuralBackend({16, 32, 4}, opt, 5), cfg);
  auto env_f = grid4(8);
  auto env_a = grid4(8);
  std::int64_t identical_through = 0;
  while (adaptive.global_step() < 59) {
    fixed.run(env_f, 1);
    adaptive.run(env_a, 1);
    const bool same = fixed.log() == adaptive.log() && fixed.backend().online() == adaptive.backend().online() &&
                      fixed.backend().target() == adaptive.backend().target() &&
                      fixed.backend().optimizer() == adaptive.backend().optimizer();
    if (!same) break;
    identical_through = adaptive.global_step();
  }
  const bool ok = identical_through == 59 && !adaptive.queue().full() && fixed.log().target_updates.size() == 5;
  return {ok, fmt("runs identical through step %lld of 59 warm-up steps", static_cast<long long>(identical_through))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome harness_determinism() {
  const fs::path root = fs::temp_directory_path() / "asdqn_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  std::ofstream(config) << R"({
    "env": {"family": "gridworld", "params": {"rows": 4, "cols": 4, "slip": 0.1}},
    "agent": {"hidden_layers": [32], "min_fill": 200},
    "sync": {"kind": ["fixed", "adaptive"], "C": 50},
    "run": {"iterations": 4, "train_steps_per_iteration": 1000, "eval_episodes": 20, "seeds": [1, 2]}
  })";
  int failures = 0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string(ASDQN_CLI_PATH) + " run " + config.string() + " --workers 4 --output " +
                            (root / run).string() + " >/dev/null 2>&1";
    failures += std::system(cmd.c_str()) != 0;
  }
  if (failures) return {false, "CLI run failed"};
  int compared = 0;
  int differing = 0;
  for (const char* cell : {"fixed-seed1", "fixed-seed2", "adaptive-seed1", "adaptive-seed2"}) {
    const auto a = slurp(root / "a" / cell / "iterations.csv");
    const auto b = slurp(root / "b" / cell / "iterations.csv");
    ++compared;
    differing += a.empty() || a != b;
  }
  fs::remove_all(root);
  return {differing == 0, fmt("%d/%d iterations.csv files byte-identical across two CLI invocations",
                              compared - differing, compared)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "weight-vector suite", 1.0, weight_vectors},
      {2, "decision invariance under r -> a*r + b", 60.0, decision_invariance},
      {3, "worked-decision oracle", 1.0, worked_decisions},
      {4, "gradient exactness", 30.0, gradient_exactness},
      {5, "tabular convergence oracle", 60.0, tabular_convergence},
      {6, "replay uniformity and FIFO", 60.0, replay_uniformity},
      {7, "C=1 collapse", 60.0, c1_collapse},
      {8, "end-to-end learning", 3 * 300.0, end_to_end},
      {9, "stability comparison at C=25", 1800.0, stability_comparison},
      {10, "warm-up equivalence", 60.0, warmup_equivalence},
      {11, "harness determinism", 600.0, harness_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto started = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const bool in_time = secs < c.max_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %2d: %s | %s | %.2f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.max_seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
