#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the value-iteration or training code it is used to check.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "asdqn/env.hpp"

namespace oracle {

/// Next state of a deterministic MDP row; -1 if the row is not one-hot.
inline int deterministic_next(const asdqn::ExplicitMDP& mdp, int s, int a) {
  int next = -1;
  for (int n = 0; n < mdp.num_states; ++n) {
    const double p = mdp.p(s, a, n);
    if (p == 1.0) next = n;
    else if (p != 0.0) return -1;
  }
  return next;
}

/// Breadth-first distance (in actions) from every state to the nearest
/// terminal state of a deterministic MDP; -1 if unreachable.
inline std::vector<int> bfs_distance_to_terminal(const asdqn::ExplicitMDP& mdp) {
  const int S = mdp.num_states;
  std::vector<std::vector<int>> predecessors(S);
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a) predecessors[deterministic_next(mdp, s, a)].push_back(s);
  }
  std::vector<int> dist(S, -1);
  std::deque<int> frontier;
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal[s]) {
      dist[s] = 0;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop_front();
    for (int p : predecessors[s]) {
      if (dist[p] < 0) {
        dist[p] = dist[s] + 1;
        frontier.push_back(p);
      }
    }
  }
  return dist;
}

/// Best discounted return obtainable from taking `a` in `s` and then any
/// action sequence, by explicit enumeration of all sequences up to `depth`
/// actions. Deterministic MDPs only; exponential in depth.
inline double enumerate_best_return(const asdqn::ExplicitMDP& mdp, int s, int a, double gamma, int depth) {
  const int next = deterministic_next(mdp, s, a);
  const double r = mdp.r(s, a);
  if (depth <= 1 || mdp.terminal[next]) return r;
  double best = -std::numeric_limits<double>::infinity();
  for (int b = 0; b < mdp.num_actions; ++b) {
    best = std::max(best, enumerate_best_return(mdp, next, b, gamma, depth - 1));
  }
  return r + gamma * best;
}

/// Pearson chi-square goodness-of-fit p-value against the uniform distribution.
inline double uniform_chi_square_p(const std::vector<std::uint64_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracle
