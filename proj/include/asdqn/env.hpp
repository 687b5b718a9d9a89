#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asdqn/errors.hpp"
#include "asdqn/rng.hpp"

namespace asdqn {

using EnvParams = std::map<std::string, double>;

struct EnvSpec {
  std::string name;
  int num_states = 0;
  int num_actions = 0;
  double gamma_hint = 0.9;
  int max_episode_steps = 1;
};

struct Observation {
  int state_id = 0;
  std::vector<double> encoded;  // one-hot, length num_states
};

inline Observation encode_state(int state_id, int num_states) {
  Observation obs{state_id, std::vector<double>(static_cast<std::size_t>(num_states), 0.0)};
  obs.encoded[static_cast<std::size_t>(state_id)] = 1.0;
  return obs;
}

/// Dense tabular model of a finite MDP. Terminal states self-loop with zero
/// reward so that Bellman backups over the whole state space are well defined.
struct ExplicitMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> transition;  // [s][a][s'] row-major
  std::vector<double> reward;      // [s][a]
  std::vector<bool> terminal;      // [s]

  ExplicitMDP() = default;
  ExplicitMDP(int states, int actions)
      : num_states(states),
        num_actions(actions),
        transition(static_cast<std::size_t>(states) * actions * states, 0.0),
        reward(static_cast<std::size_t>(states) * actions, 0.0),
        terminal(static_cast<std::size_t>(states), false) {}

  double& p(int s, int a, int next) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  double p(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * num_actions + a]; }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * num_actions + a]; }

  /// Largest |sum_s' p(s,a,s') - 1| over all rows.
  double max_row_error() const {
    double worst = 0.0;
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) {
        double sum = 0.0;
        for (int n = 0; n < num_states; ++n) sum += p(s, a, n);
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    }
    return worst;
  }
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;      // episode over (terminal entered or time limit hit)
  bool terminal = false;  // a terminal state was entered; false on pure time-limit cutoff
};

/// A finite, seedable environment. Dynamics are held as an ExplicitMDP and
/// sampled with the environment's own RNG stream, so `enumerate_mdp()` is
/// exact by construction.
class Environment {
 public:
  Environment(EnvSpec spec, ExplicitMDP mdp, int start_state, std::uint64_t seed)
      : spec_(std::move(spec)), mdp_(std::move(mdp)), start_(start_state), rng_(seed) {}

  const EnvSpec& spec() const noexcept { return spec_; }
  int num_states() const noexcept { return spec_.num_states; }
  int num_actions() const noexcept { return spec_.num_actions; }
  int start_state() const noexcept { return start_; }
  int state() const noexcept { return state_; }
  int episode_steps() const noexcept { return steps_; }

  Observation reset() {
    state_ = start_;
    steps_ = 0;
    started_ = true;
    done_ = false;
    return encode_state(state_, spec_.num_states);
  }

  /// Places the environment in an arbitrary non-terminal state with a fresh
  /// episode counter. Used for Monte-Carlo checks of the dynamics.
  Observation reset_to(int state) {
    if (state < 0 || state >= spec_.num_states) throw std::out_of_range("reset_to: state out of range");
    reset();
    state_ = state;
    return encode_state(state_, spec_.num_states);
  }

  StepResult step(int action) {
    if (action < 0 || action >= spec_.num_actions) throw std::out_of_range("step: action out of range");
    if (!started_) throw std::logic_error("step: environment not reset");
    if (done_) throw std::logic_error("step: episode is over, call reset()");

    const double reward = mdp_.r(state_, action);
    const double u = uniform01(rng_);
    int next = -1;
    double cumulative = 0.0;
    for (int n = 0; n < spec_.num_states; ++n) {
      const double p = mdp_.p(state_, action, n);
      if (p <= 0.0) continue;
      cumulative += p;
      next = n;
      if (u < cumulative) break;
    }
    state_ = next;
    ++steps_;

    StepResult out;
    out.reward = reward;
    out.terminal = mdp_.terminal[static_cast<std::size_t>(state_)];
    out.done = out.terminal || steps_ >= spec_.max_episode_steps;
    out.obs = encode_state(state_, spec_.num_states);
    done_ = out.done;
    return out;
  }

  const ExplicitMDP& enumerate_mdp() const noexcept { return mdp_; }

 private:
  EnvSpec spec_;
  ExplicitMDP mdp_;
  int start_;
  Rng rng_;
  int state_ = 0;
  int steps_ = 0;
  bool started_ = false;
  bool done_ = false;
};

namespace detail {

class ParamReader {
 public:
  ParamReader(const EnvParams& params, std::vector<std::string> allowed) : params_(params) {
    for (const auto& [key, value] : params) {
      bool known = false;
      for (const auto& a : allowed) known = known || a == key;
      if (!known) throw ConfigError(key, "unknown parameter");
      if (!std::isfinite(value)) throw ConfigError(key, "must be finite");
    }
  }

  double real(const std::string& key, double fallback) const {
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  int integer(const std::string& key, int fallback, int min_value) const {
    const double v = real(key, fallback);
    if (v != std::floor(v)) throw ConfigError(key, "must be an integer");
    if (v < min_value || v > 1e6) {
      throw ConfigError(key, "out of range (minimum " + std::to_string(min_value) + ")");
    }
    return static_cast<int>(v);
  }

  double probability(const std::string& key) const {
    const double v = real(key, 0.0);
    if (v < 0.0 || v >= 1.0) throw ConfigError(key, "out of range, expected [0, 1)");
    return v;
  }

 private:
  const EnvParams& params_;
};

enum GridAction { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

struct GridLayout {
  int rows;
  int cols;
  int start;
  int goal;
  std::vector<bool> cliff;  // stepping into a cliff cell teleports to start
  double step_cost;
  double goal_reward;
  double cliff_reward;
  double slip;
};

inline ExplicitMDP build_grid_mdp(const GridLayout& g) {
  const int n = g.rows * g.cols;
  ExplicitMDP mdp(n, 4);
  mdp.terminal[static_cast<std::size_t>(g.goal)] = true;

  constexpr int dr[4] = {-1, 0, 1, 0};
  constexpr int dc[4] = {0, 1, 0, -1};

  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 4; ++a) {
      if (s == g.goal) {
        mdp.p(s, a, s) = 1.0;
        continue;
      }
      // Intended direction with 1 - slip, each perpendicular direction slip / 2.
      const int lateral_a = (a + 1) % 4;
      const int lateral_b = (a + 3) % 4;
      const std::pair<int, double> outcomes[3] = {
          {a, 1.0 - g.slip}, {lateral_a, g.slip / 2.0}, {lateral_b, g.slip / 2.0}};
      double expected_reward = 0.0;
      for (const auto& [dir, prob] : outcomes) {
        if (prob <= 0.0) continue;
        int r = s / g.cols + dr[dir];
        int c = s % g.cols + dc[dir];
        if (r < 0 || r >= g.rows || c < 0 || c >= g.cols) {
          r = s / g.cols;
          c = s % g.cols;
        }
        int next = r * g.cols + c;
        double reward = g.step_cost;
        if (g.cliff[static_cast<std::size_t>(next)]) {
          next = g.start;
          reward = g.cliff_reward;
        } else if (next == g.goal) {
          reward = g.goal_reward;
        }
        mdp.p(s, a, next) += prob;
        expected_reward += prob * reward;
      }
      mdp.r(s, a) = expected_reward;
    }
  }
  return mdp;
}

inline Environment make_gridworld(const EnvParams& params, std::uint64_t seed) {
  ParamReader in(params, {"rows", "cols", "slip", "step_cost", "goal_reward", "max_steps"});
  GridLayout g{};
  g.rows = in.integer("rows", 4, 1);
  g.cols = in.integer("cols", 4, 1);
  if (g.rows * g.cols < 2) throw ConfigError("rows", "grid needs at least 2 cells");
  g.slip = in.probability("slip");
  g.step_cost = in.real("step_cost", -0.01);
  g.goal_reward = in.real("goal_reward", 1.0);
  g.cliff_reward = 0.0;
  g.start = 0;
  g.goal = g.rows * g.cols - 1;
  g.cliff.assign(static_cast<std::size_t>(g.rows * g.cols), false);
  EnvSpec spec{"gridworld", g.rows * g.cols, 4, 0.9, in.integer("max_steps", 100, 1)};
  return Environment(std::move(spec), build_grid_mdp(g), g.start, seed);
}

inline Environment make_cliffwalk(const EnvParams& params, std::uint64_t seed) {
  ParamReader in(params,
                 {"rows", "cols", "slip", "step_cost", "goal_reward", "cliff_reward", "max_steps"});
  GridLayout g{};
  g.rows = in.integer("rows", 4, 2);
  g.cols = in.integer("cols", 12, 3);
  g.slip = in.probability("slip");
  g.step_cost = in.real("step_cost", -1.0);
  g.goal_reward = in.real("goal_reward", 0.0);
  g.cliff_reward = in.real("cliff_reward", -100.0);
  g.start = (g.rows - 1) * g.cols;
  g.goal = g.rows * g.cols - 1;
  g.cliff.assign(static_cast<std::size_t>(g.rows * g.cols), false);
  for (int c = 1; c < g.cols - 1; ++c) g.cliff[static_cast<std::size_t>(g.start + c)] = true;
  EnvSpec spec{"cliffwalk", g.rows * g.cols, 4, 0.9, in.integer("max_steps", 200, 1)};
  return Environment(std::move(spec), build_grid_mdp(g), g.start, seed);
}

/// States 0..length-1; action 0 moves back (clamped at 0), action 1 moves
/// forward. The last state is terminal and entering it pays goal_reward.
inline Environment make_chain(const EnvParams& params, std::uint64_t seed) {
  ParamReader in(params, {"length", "slip", "step_cost", "goal_reward", "max_steps"});
  const int length = in.integer("length", 5, 2);
  const double slip = in.probability("slip");
  const double step_cost = in.real("step_cost", 0.0);
  const double goal_reward = in.real("goal_reward", 1.0);
  const int goal = length - 1;

  ExplicitMDP mdp(length, 2);
  mdp.terminal[static_cast<std::size_t>(goal)] = true;
  for (int s = 0; s < length; ++s) {
    for (int a = 0; a < 2; ++a) {
      if (s == goal) {
        mdp.p(s, a, s) = 1.0;
        continue;
      }
      const int intended = a == 1 ? s + 1 : std::max(s - 1, 0);
      const int reversed = a == 1 ? std::max(s - 1, 0) : s + 1;
      const std::pair<int, double> outcomes[2] = {{intended, 1.0 - slip}, {reversed, slip}};
      double expected_reward = 0.0;
      for (const auto& [next, prob] : outcomes) {
        if (prob <= 0.0) continue;
        mdp.p(s, a, next) += prob;
        expected_reward += prob * (next == goal ? goal_reward : step_cost);
      }
      mdp.r(s, a) = expected_reward;
    }
  }
  EnvSpec spec{"chain", length, 2, 0.9, in.integer("max_steps", 100, 1)};
  return Environment(std::move(spec), std::move(mdp), 0, seed);
}

}  // namespace detail

/// Builds one of the shipped families: "gridworld", "chain", "cliffwalk".
/// Throws ConfigError naming the offending key on invalid parameters.
inline Environment make_env(std::string_view family, const EnvParams& params, std::uint64_t seed) {
  if (family == "gridworld") return detail::make_gridworld(params, seed);
  if (family == "chain") return detail::make_chain(params, seed);
  if (family == "cliffwalk") return detail::make_cliffwalk(params, seed);
  throw ConfigError("family", "unknown environment family '" + std::string(family) + "'");
}

}  // namespace asdqn
