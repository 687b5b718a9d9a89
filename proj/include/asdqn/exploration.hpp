#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "asdqn/errors.hpp"
#include "asdqn/rng.hpp"

namespace asdqn {

/// Linear epsilon annealing from eps_start to eps_end over decay_steps, then flat.
struct ExplorationSchedule {
  double eps_start = 1.0;
  double eps_end = 0.1;
  std::int64_t decay_steps = 1;

  void validate() const {
    if (eps_start < 0.0 || eps_start > 1.0) throw ConfigError("agent.schedule.eps_start", "must be in [0, 1]");
    if (eps_end < 0.0 || eps_end > 1.0) throw ConfigError("agent.schedule.eps_end", "must be in [0, 1]");
    if (eps_end > eps_start) throw ConfigError("agent.schedule.eps_end", "must not exceed eps_start");
    if (decay_steps < 1) throw ConfigError("agent.schedule.decay_steps", "must be >= 1");
  }

  static ExplorationSchedule constant(double eps) { return {eps, eps, 1}; }
};

inline double epsilon_at(const ExplorationSchedule& sched, std::int64_t step) {
  const double frac = std::min(1.0, static_cast<double>(std::max<std::int64_t>(step, 0)) /
                                        static_cast<double>(sched.decay_steps));
  return sched.eps_start + (sched.eps_end - sched.eps_start) * frac;
}

/// Index of the largest value; ties go to the lowest index.
inline int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

/// Epsilon-greedy choice over one row of action values. Exactly one uniform
/// draw is consumed per call, plus one more when exploring.
inline int select_action(std::span<const double> q_values, double eps, Rng& rng) {
  if (q_values.empty()) throw std::invalid_argument("select_action: no actions");
  if (uniform01(rng) < eps) {
    return static_cast<int>(uniform_index(rng, q_values.size()));
  }
  return argmax(q_values);
}

}  // namespace asdqn
