#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "asdqn/env.hpp"
#include "asdqn/errors.hpp"
#include "asdqn/exploration.hpp"
#include "asdqn/replay.hpp"
#include "asdqn/rng.hpp"
#include "asdqn/sync.hpp"
#include "asdqn/training_log.hpp"

namespace asdqn {

/// Dense [num_states x num_actions] action-value table, zero-initialized.
class QTable {
 public:
  QTable() = default;
  QTable(int num_states, int num_actions)
      : states_(num_states),
        actions_(num_actions),
        values_(static_cast<std::size_t>(num_states) * num_actions, 0.0) {
    if (num_states < 1 || num_actions < 1) throw std::invalid_argument("QTable: empty dimensions");
  }

  int num_states() const noexcept { return states_; }
  int num_actions() const noexcept { return actions_; }

  double& operator()(int s, int a) { return values_[index(s, a)]; }
  double operator()(int s, int a) const { return values_[index(s, a)]; }

  std::span<const double> row(int s) const {
    check(s, 0);
    return {values_.data() + static_cast<std::size_t>(s) * actions_, static_cast<std::size_t>(actions_)};
  }

  double max(int s) const {
    auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }
  int greedy(int s) const { return argmax(row(s)); }

  const std::vector<double>& values() const noexcept { return values_; }

  /// max |a - b| over all entries; tables must have equal shape.
  friend double max_abs_diff(const QTable& a, const QTable& b) {
    if (a.states_ != b.states_ || a.actions_ != b.actions_) {
      throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
      worst = std::max(worst, std::abs(a.values_[i] - b.values_[i]));
    }
    return worst;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  void check(int s, int a) const {
    if (s < 0 || s >= states_ || a < 0 || a >= actions_) throw std::out_of_range("QTable: index out of range");
  }
  std::size_t index(int s, int a) const {
    check(s, a);
    return static_cast<std::size_t>(s) * actions_ + a;
  }

  int states_ = 0;
  int actions_ = 0;
  std::vector<double> values_;
};

enum class AlphaDecay { constant, inverse_count };

struct LearnConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  /// inverse_count uses alpha / N(s, a), N counting updates of that entry.
  AlphaDecay decay = AlphaDecay::constant;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must be in (0, 1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma", "must be in (0, 1)");
  }
};

/// r if the transition ended the episode in a terminal state, else
/// r + gamma * max_a' target_q(s', a').
inline double td_target(const Transition& t, const QTable& target_q, double gamma) {
  if (t.s < 0 || t.s >= target_q.num_states() || t.a < 0 || t.a >= target_q.num_actions()) {
    throw std::out_of_range("td_target: transition index out of range");
  }
  const double bootstrap = target_q.max(t.s_next);  // validates s_next too
  if (t.terminal) return t.r;
  return t.r + gamma * bootstrap;
}

/// q(s,a) += alpha * (td_target - q(s,a)). Returns the new entry.
inline double q_update(QTable& q, const Transition& t, const QTable& target_q, double alpha, double gamma) {
  const double y = td_target(t, target_q, gamma);
  double& entry = q(t.s, t.a);
  entry += alpha * (y - entry);
  return entry;
}

inline double q_update(QTable& q, const Transition& t, const QTable& target_q, const LearnConfig& cfg) {
  return q_update(q, t, target_q, cfg.alpha, cfg.gamma);
}

/// Tracks per-entry visit counts to produce the step size for each update.
class StepSizer {
 public:
  StepSizer(const LearnConfig& cfg, int num_states, int num_actions)
      : cfg_(cfg), actions_(num_actions), visits_(static_cast<std::size_t>(num_states) * num_actions, 0) {}

  double next(int s, int a) {
    auto& n = visits_[static_cast<std::size_t>(s) * actions_ + a];
    ++n;
    return cfg_.decay == AlphaDecay::constant ? cfg_.alpha : cfg_.alpha / static_cast<double>(n);
  }

 private:
  LearnConfig cfg_;
  int actions_;
  std::vector<std::uint64_t> visits_;
};

struct ValueIterationResult {
  QTable q;
  int iterations = 0;
  std::vector<double> deltas;  // sup-norm change per sweep
};

/// Jacobi value iteration on Q. Stops at the first sweep whose sup-norm
/// change is below tol, which bounds the Bellman residual of the returned
/// table by gamma * tol < tol.
inline ValueIterationResult value_iteration_trace(const ExplicitMDP& mdp, double gamma, double tol,
                                                  int max_iterations = 1'000'000) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma", "must be in (0, 1)");
  if (!(tol > 0.0)) throw ConfigError("tol", "must be positive");
  for (double p : mdp.transition) {
    if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("value_iteration: invalid transition probability");
  }
  if (mdp.max_row_error() > 1e-9) throw std::invalid_argument("value_iteration: transition rows are not stochastic");

  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  ValueIterationResult out{QTable(S, A), 0, {}};
  std::vector<double> v(static_cast<std::size_t>(S), 0.0);
  QTable next(S, A);

  while (out.iterations < max_iterations) {
    for (int s = 0; s < S; ++s) v[static_cast<std::size_t>(s)] = out.q.max(s);
    double delta = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double expected = 0.0;
        for (int n = 0; n < S; ++n) expected += mdp.p(s, a, n) * v[static_cast<std::size_t>(n)];
        next(s, a) = mdp.r(s, a) + gamma * expected;
        delta = std::max(delta, std::abs(next(s, a) - out.q(s, a)));
      }
    }
    std::swap(out.q, next);
    ++out.iterations;
    out.deltas.push_back(delta);
    if (delta < tol) break;
  }
  return out;
}

inline QTable value_iteration(const ExplicitMDP& mdp, double gamma, double tol) {
  return value_iteration_trace(mdp, gamma, tol).q;
}

/// sup_{s,a} |(T q)(s,a) - q(s,a)| for the optimal Bellman operator T.
inline double bellman_residual(const ExplicitMDP& mdp, const QTable& q, double gamma) {
  double worst = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      double expected = 0.0;
      for (int n = 0; n < mdp.num_states; ++n) expected += mdp.p(s, a, n) * q.max(n);
      worst = std::max(worst, std::abs(mdp.r(s, a) + gamma * expected - q(s, a)));
    }
  }
  return worst;
}

struct TabularRunConfig {
  LearnConfig learn;
  ExplorationSchedule explore = ExplorationSchedule::constant(1.0);
  SyncPolicy sync = SyncPolicy::fixed(1);
  std::int64_t steps = 1;
  std::uint64_t seed = 0;
};

struct TabularRunResult {
  QTable q;
  QTable target;
  TrainingLog log;
};

/// Online Q-learning with a second, periodically synchronized target table.
/// Each step: act, observe, push the reward, update q(s,a) toward a target
/// computed from the target table, then ask the sync policy whether to copy
/// q into the target. Behavior draws come from derive_seed(seed, "agent.explore").
inline TabularRunResult tabular_dqn_train(Environment& env, const TabularRunConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("steps", "must be >= 1");
  cfg.learn.validate();
  cfg.explore.validate();

  const int S = env.num_states();
  const int A = env.num_actions();
  TabularRunResult out{QTable(S, A), QTable(S, A), {}};
  StepSizer sizer(cfg.learn, S, A);
  RewardQueue queue = cfg.sync.make_queue();
  Rng rng = make_rng(cfg.seed, "agent.explore");

  Observation obs = env.reset();
  double episode_return = 0.0;
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const double eps = epsilon_at(cfg.explore, step - 1);
    const int action = select_action(out.q.row(obs.state_id), eps, rng);
    StepResult res = env.step(action);
    const Transition t{obs.state_id, action, res.reward, res.obs.state_id, res.terminal};
    queue.push(res.reward);
    episode_return += res.reward;

    q_update(out.q, t, out.target, sizer.next(t.s, t.a), cfg.learn.gamma);
    out.log.steps.push_back({action, res.reward, eps, std::nullopt});

    const SyncDecision d = evaluate_sync(cfg.sync, step, queue);
    out.log.record_sync(step, d);
    if (d.sync) out.target = out.q;

    if (res.done) {
      out.log.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      obs = env.reset();
    } else {
      obs = std::move(res.obs);
    }
  }
  return out;
}

}  // namespace asdqn
