#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "asdqn/env.hpp"
#include "asdqn/errors.hpp"
#include "asdqn/exploration.hpp"
#include "asdqn/neural.hpp"
#include "asdqn/optimizer.hpp"
#include "asdqn/replay.hpp"
#include "asdqn/rng.hpp"
#include "asdqn/sync.hpp"
#include "asdqn/tabular.hpp"
#include "asdqn/training_log.hpp"

namespace asdqn {

struct TrainConfig {
  std::int64_t total_steps = 10'000;
  std::int64_t episodes_cap = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_episode_steps = std::numeric_limits<std::int64_t>::max();
  double gamma = 0.9;
  int batch_size = 32;
  std::int64_t min_fill = 1000;
  int learn_every = 1;
  std::size_t replay_capacity = 10'000;
  ExplorationSchedule explore{1.0, 0.05, 10'000};
  SyncPolicy sync = SyncPolicy::fixed(500);
  std::uint64_t seed = 0;

  /// Learning starts once the buffer holds at least this many transitions.
  std::int64_t effective_min_fill() const { return std::max<std::int64_t>(min_fill, batch_size); }

  void validate() const {
    if (total_steps < 1) throw ConfigError("run.total_steps", "must be >= 1");
    if (episodes_cap < 1) throw ConfigError("run.episodes_cap", "must be >= 1");
    if (max_episode_steps < 1) throw ConfigError("run.max_episode_steps", "must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("agent.gamma", "must be in (0, 1)");
    if (batch_size < 1) throw ConfigError("agent.batch_size", "must be >= 1");
    if (min_fill < 0) throw ConfigError("agent.min_fill", "must be >= 0");
    if (learn_every < 1) throw ConfigError("agent.learn_every", "must be >= 1");
    if (replay_capacity < 1) throw ConfigError("agent.replay_capacity", "must be >= 1");
    if (static_cast<std::int64_t>(replay_capacity) < effective_min_fill()) {
      throw ConfigError("agent.replay_capacity", "smaller than min_fill; learning would never start");
    }
    explore.validate();
  }
};

/// What a learning backend must provide to the training loop.
template <typename B>
concept QBackend = requires(B b, const B cb, const Batch& batch, int state, double gamma) {
  { cb.q_values(state) } -> std::convertible_to<std::vector<double>>;
  { b.learn(batch, gamma) } -> std::convertible_to<double>;
  { b.sync_target() };
  { cb.num_states() } -> std::convertible_to<int>;
  { cb.num_actions() } -> std::convertible_to<int>;
};

inline std::vector<double> q_row(const ParamSet& params, int state) {
  const int in = params.input_dim();
  if (state < 0 || state >= in) throw std::out_of_range("q_row: state out of range");
  Matrix x = Matrix::Zero(1, in);
  x(0, state) = 1.0;
  const Matrix q = forward(params, x);
  return {q.data(), q.data() + q.size()};
}

/// MLP online/target pair trained by minibatch gradient steps on the DQN loss.
class NeuralBackend {
 public:
  NeuralBackend(std::vector<int> layer_dims, OptimizerConfig opt, std::uint64_t init_seed)
      : online_(init_params(layer_dims, init_seed)), target_(online_), opt_(opt, online_) {}

  int num_states() const { return online_.input_dim(); }
  int num_actions() const { return online_.output_dim(); }

  std::vector<double> q_values(int state) const { return q_row(online_, state); }

  double learn(const Batch& batch, double gamma) {
    auto lg = loss_and_grad(online_, target_, batch, gamma);
    if (!std::isfinite(lg.loss)) return lg.loss;
    optimizer_step(online_, lg.grads, opt_);
    return lg.loss;
  }

  void sync_target() { target_ = clone_params(online_); }

  const ParamSet& online() const noexcept { return online_; }
  const ParamSet& target() const noexcept { return target_; }
  const OptimizerState& optimizer() const noexcept { return opt_; }

 private:
  ParamSet online_;
  ParamSet target_;
  OptimizerState opt_;
};

/// Q-table online/target pair; each sampled transition gets one q_update
/// against the target table, in batch order.
class TabularBackend {
 public:
  TabularBackend(int num_states, int num_actions, LearnConfig cfg)
      : online_(num_states, num_actions), target_(num_states, num_actions), cfg_(cfg),
        sizer_(cfg, num_states, num_actions) {}

  int num_states() const { return online_.num_states(); }
  int num_actions() const { return online_.num_actions(); }

  std::vector<double> q_values(int state) const {
    auto r = online_.row(state);
    return {r.begin(), r.end()};
  }

  double learn(const Batch& batch, double gamma) {
    double total = 0.0;
    for (const auto& t : batch) {
      const double e = td_target(t, target_, gamma) - online_(t.s, t.a);
      total += e * e;
      q_update(online_, t, target_, sizer_.next(t.s, t.a), gamma);
    }
    return total / static_cast<double>(batch.size());
  }

  void sync_target() { target_ = online_; }

  const QTable& online() const noexcept { return online_; }
  const QTable& target() const noexcept { return target_; }

 private:
  QTable online_;
  QTable target_;
  LearnConfig cfg_;
  StepSizer sizer_;
};

struct PhaseStats {
  std::vector<double> episode_returns;  // episodes that ended during the phase
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  std::int64_t sync_attempts = 0;
  std::int64_t syncs_taken = 0;
  std::int64_t steps = 0;
};

/// Stateful training loop. Per environment step, in order: choose an
/// epsilon-greedy action, step the environment, store the transition and
/// push its reward into the sync queue, take a learning step when the
/// buffer is warm and the step index is a multiple of learn_every, then
/// consult the sync policy and copy online into target on a positive
/// decision. Episodes continue across calls to `run`.
///
/// Randomness: exploration from derive_seed(seed, "agent.explore"),
/// minibatch sampling from derive_seed(seed, "agent.replay").
template <QBackend Backend>
class Agent {
 public:
  Agent(Backend backend, TrainConfig cfg)
      : backend_(std::move(backend)),
        cfg_(std::move(cfg)),
        replay_(cfg_.replay_capacity),
        queue_(cfg_.sync.make_queue()),
        explore_rng_(make_rng(cfg_.seed, "agent.explore")),
        replay_rng_(make_rng(cfg_.seed, "agent.replay")) {
    cfg_.validate();
  }

  /// Runs up to `steps` environment steps, stopping early once the episode
  /// cap is reached. Throws DivergenceError on a non-finite loss.
  PhaseStats run(Environment& env, std::int64_t steps) {
    if (env.num_states() != backend_.num_states() || env.num_actions() != backend_.num_actions()) {
      throw std::invalid_argument("Agent: environment and backend dimensions differ");
    }
    PhaseStats stats;
    for (std::int64_t i = 0; i < steps && episodes_ < cfg_.episodes_cap; ++i) {
      if (!obs_) {
        obs_ = env.reset();
        episode_steps_ = 0;
        episode_return_ = 0.0;
      }
      ++step_;
      ++episode_steps_;
      ++stats.steps;

      const double eps = epsilon_at(cfg_.explore, step_ - 1);
      const auto q = backend_.q_values(obs_->state_id);
      const int action = select_action(q, eps, explore_rng_);
      StepResult res = env.step(action);

      replay_.push({obs_->state_id, action, res.reward, res.obs.state_id, res.terminal});
      queue_.push(res.reward);
      episode_return_ += res.reward;

      StepRecord rec{action, res.reward, eps, std::nullopt};
      if (static_cast<std::int64_t>(replay_.size()) >= cfg_.effective_min_fill() && step_ % cfg_.learn_every == 0) {
        const Batch batch = replay_.sample(static_cast<std::size_t>(cfg_.batch_size), replay_rng_);
        const double loss = backend_.learn(batch, cfg_.gamma);
        if (!std::isfinite(loss)) throw DivergenceError(step_, "non-finite loss");
        rec.loss = loss;
        stats.loss_sum += loss;
        ++stats.loss_count;
      }
      log_.steps.push_back(rec);

      const SyncDecision d = evaluate_sync(cfg_.sync, step_, queue_);
      log_.record_sync(step_, d);
      if (d.check_point) ++stats.sync_attempts;
      if (d.sync) {
        backend_.sync_target();
        ++stats.syncs_taken;
      }

      if (res.done || episode_steps_ >= cfg_.max_episode_steps) {
        log_.episode_returns.push_back(episode_return_);
        stats.episode_returns.push_back(episode_return_);
        ++episodes_;
        obs_.reset();
      } else {
        obs_ = std::move(res.obs);
      }
    }
    return stats;
  }

  /// Runs until total_steps (or the episode cap) is reached.
  PhaseStats run_to_completion(Environment& env) { return run(env, cfg_.total_steps - step_); }

  const Backend& backend() const noexcept { return backend_; }
  const TrainingLog& log() const noexcept { return log_; }
  const RewardQueue& queue() const noexcept { return queue_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  std::int64_t global_step() const noexcept { return step_; }
  std::int64_t episodes() const noexcept { return episodes_; }

 private:
  Backend backend_;
  TrainConfig cfg_;
  ReplayBuffer<Transition> replay_;
  RewardQueue queue_;
  Rng explore_rng_;
  Rng replay_rng_;
  TrainingLog log_;
  std::optional<Observation> obs_;
  std::int64_t step_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t episode_steps_ = 0;
  double episode_return_ = 0.0;
};

template <QBackend Backend>
struct TrainResult {
  Backend backend;
  TrainingLog log;
};

template <QBackend Backend>
TrainResult<Backend> train(Environment& env, Backend backend, const TrainConfig& cfg) {
  Agent<Backend> agent(std::move(backend), cfg);
  agent.run_to_completion(env);
  return {agent.backend(), agent.log()};
}

struct EvalResult {
  double mean_return = 0.0;
  std::vector<double> returns;
};

/// Runs `episodes` episodes with an epsilon-greedy policy over `q_of_state`
/// and returns undiscounted episode returns. Exploration draws come from
/// derive_seed(seed, "eval.explore").
template <typename QFunction>
  requires std::invocable<const QFunction&, int>
EvalResult evaluate(const QFunction& q_of_state, Environment& env, int episodes, double eps_eval, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  Rng rng = make_rng(seed, "eval.explore");
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env.reset();
    double total = 0.0;
    while (true) {
      const std::vector<double> q = q_of_state(obs.state_id);
      StepResult res = env.step(select_action(q, eps_eval, rng));
      total += res.reward;
      if (res.done) break;
      obs = std::move(res.obs);
    }
    out.returns.push_back(total);
  }
  out.mean_return = std::accumulate(out.returns.begin(), out.returns.end(), 0.0) / out.returns.size();
  return out;
}

inline EvalResult evaluate(const QTable& table, Environment& env, int episodes, double eps_eval, std::uint64_t seed) {
  return evaluate([&](int s) { auto r = table.row(s); return std::vector<double>(r.begin(), r.end()); }, env,
                  episodes, eps_eval, seed);
}

inline EvalResult evaluate(const ParamSet& params, Environment& env, int episodes, double eps_eval,
                           std::uint64_t seed) {
  return evaluate([&](int s) { return q_row(params, s); }, env, episodes, eps_eval, seed);
}

}  // namespace asdqn
