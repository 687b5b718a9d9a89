#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "asdqn/agent.hpp"
#include "oracles.hpp"

using namespace asdqn;

namespace {

Environment grid4(std::uint64_t seed = 5) {
  return make_env("gridworld", {{"rows", 4}, {"cols", 4}, {"slip", 0.0}}, seed);
}

// Every step pays -1 and no episode can reach the terminal state.
Environment flat_chain() {
  return make_env("chain", {{"length", 50}, {"step_cost", -1.0}, {"goal_reward", -1.0}, {"max_steps", 10}}, 0);
}

TrainConfig small_config(SyncPolicy sync, std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.total_steps = 600;
  cfg.max_episode_steps = 40;
  cfg.batch_size = 8;
  cfg.min_fill = 16;
  cfg.replay_capacity = 500;
  cfg.explore = {1.0, 0.1, 400};
  cfg.sync = sync;
  cfg.seed = seed;
  return cfg;
}

NeuralBackend small_net(std::uint64_t seed = 1) {
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adam;
  opt.learning_rate = 1e-3;
  return NeuralBackend({16, 16, 4}, opt, seed);
}

std::set<std::int64_t> synced_steps(const TrainingLog& log) {
  return {log.target_updates.begin(), log.target_updates.end()};
}

}  // namespace

TEST(Epsilon, LinearSchedule) {
  const ExplorationSchedule s{1.0, 0.1, 100};
  EXPECT_EQ(epsilon_at(s, 0), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(s, 100), 0.1);
  EXPECT_DOUBLE_EQ(epsilon_at(s, 50), 0.55);
  EXPECT_DOUBLE_EQ(epsilon_at(s, 10'000), 0.1);
}

TEST(Epsilon, ValidateNamesKey) {
  try {
    ExplorationSchedule{0.1, 0.5, 10}.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "agent.schedule.eps_end");
  }
}

TEST(SelectAction, GreedyAndTies) {
  Rng rng(1);
  const std::vector<double> q{0.1, 0.9, 0.3};
  EXPECT_EQ(select_action(q, 0.0, rng), 1);
  const std::vector<double> tie{0.5, 0.5};
  EXPECT_EQ(select_action(tie, 0.0, rng), 0);
}

TEST(SelectAction, FullExplorationIsUniform) {
  Rng rng = make_rng(2, "test.explore");
  const std::vector<double> q{0.0, 5.0, 1.0, 2.0};
  std::vector<std::size_t> counts(4, 0);
  for (int i = 0; i < 100'000; ++i) ++counts[static_cast<std::size_t>(select_action(q, 1.0, rng))];
  EXPECT_GT(oracle::uniform_chi_square_p(counts), 0.001);
}

TEST(Agent, SameSeedSameLog) {
  auto env_a = grid4();
  auto env_b = grid4();
  const auto a = train(env_a, small_net(), small_config(SyncPolicy::adaptive(25)));
  const auto b = train(env_b, small_net(), small_config(SyncPolicy::adaptive(25)));
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.backend.online(), b.backend.online());
  EXPECT_EQ(a.backend.target(), b.backend.target());
}

TEST(Agent, SplitRunsMatchOneRun) {
  auto env_a = grid4();
  auto env_b = grid4();
  Agent<NeuralBackend> whole(small_net(), small_config(SyncPolicy::fixed(50)));
  whole.run(env_a, 600);
  Agent<NeuralBackend> split(small_net(), small_config(SyncPolicy::fixed(50)));
  split.run(env_b, 123);
  split.run(env_b, 477);
  EXPECT_EQ(whole.log(), split.log());
  EXPECT_EQ(whole.backend().online(), split.backend().online());
}

TEST(Agent, ConstantRewardsFixedVersusAdaptive) {
  auto env_f = flat_chain();
  auto env_a = flat_chain();
  auto cfg = small_config(SyncPolicy::fixed(5));
  cfg.total_steps = 200;
  const auto fixed = train(env_f, TabularBackend(50, 2, {0.5, 0.9, AlphaDecay::constant}), cfg);
  cfg.sync = SyncPolicy::adaptive(5, 10);
  const auto adaptive = train(env_a, TabularBackend(50, 2, {0.5, 0.9, AlphaDecay::constant}), cfg);

  std::vector<std::int64_t> every_c;
  for (std::int64_t t = 5; t <= 200; t += 5) every_c.push_back(t);
  EXPECT_EQ(fixed.log.target_updates, every_c);
  // The 20-slot queue fills at step 20; equal halves never trigger a sync.
  EXPECT_EQ(adaptive.log.target_updates, (std::vector<std::int64_t>{5, 10, 15}));
  ASSERT_EQ(adaptive.log.sync_events.size(), every_c.size());
  for (const auto& ev : adaptive.log.sync_events) {
    if (ev.step >= 20) {
      EXPECT_EQ(ev.avg_old, -1.0);
      EXPECT_EQ(ev.avg_new, -1.0);
    }
  }
}

TEST(Agent, TargetChangesExactlyAtSyncs) {
  auto env = grid4();
  Agent<NeuralBackend> agent(small_net(), small_config(SyncPolicy::adaptive(20, 10)));
  for (int i = 0; i < 600; ++i) {
    const ParamSet before = agent.backend().target();
    const auto updates = agent.log().target_updates.size();
    agent.run(env, 1);
    const bool synced = agent.log().target_updates.size() > updates;
    const bool changed = !(agent.backend().target() == before);
    // Learning runs every step once warm, so a sync after warm-up always moves the target.
    if (agent.global_step() > 16) {
      EXPECT_EQ(changed, synced) << "step " << agent.global_step();
    } else {
      EXPECT_FALSE(changed) << "step " << agent.global_step();
    }
  }
}

TEST(Agent, AdaptiveSyncsAreSubsetOfFixed) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto env_f = grid4(seed);
    auto env_a = grid4(seed);
    const auto fixed = train(env_f, small_net(seed), small_config(SyncPolicy::fixed(10), seed));
    const auto adaptive = train(env_a, small_net(seed), small_config(SyncPolicy::adaptive(10), seed));
    const auto fs = synced_steps(fixed.log);
    for (auto t : adaptive.log.target_updates) {
      EXPECT_EQ(t % 10, 0);
      EXPECT_TRUE(fs.count(t)) << t;
    }
    EXPECT_EQ(adaptive.log.sync_events.size(), fixed.log.sync_events.size());
  }
}

TEST(Agent, WarmupEquivalence) {
  // Queue of 2n = 50 first fills at step 50.
  auto env_f = grid4();
  auto env_a = grid4();
  Agent<NeuralBackend> fixed(small_net(), small_config(SyncPolicy::fixed(25)));
  Agent<NeuralBackend> adaptive(small_net(), small_config(SyncPolicy::adaptive(25, 25)));
  fixed.run(env_f, 49);
  adaptive.run(env_a, 49);
  EXPECT_FALSE(adaptive.queue().full());
  EXPECT_EQ(fixed.log(), adaptive.log());
  EXPECT_EQ(fixed.backend().online(), adaptive.backend().online());
  EXPECT_EQ(fixed.backend().target(), adaptive.backend().target());
  EXPECT_EQ(fixed.backend().optimizer(), adaptive.backend().optimizer());
}

TEST(Agent, EpisodeCapStopsEarly) {
  auto env = grid4();
  auto cfg = small_config(SyncPolicy::fixed(10));
  cfg.episodes_cap = 3;
  cfg.max_episode_steps = 7;
  const auto run = train(env, small_net(), cfg);
  EXPECT_EQ(run.log.episode_returns.size(), 3u);
  EXPECT_LE(run.log.steps.size(), 21u);
}

TEST(Agent, DivergenceIsAnError) {
  auto env = make_env("chain", {{"length", 2}, {"goal_reward", 1e200}}, 0);
  auto cfg = small_config(SyncPolicy::fixed(10));
  cfg.min_fill = 1;
  cfg.batch_size = 1;
  try {
    train(env, NeuralBackend({2, 4, 2}, OptimizerConfig{}, 0), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 1);
  }
}

TEST(Agent, RejectsInvalidConfig) {
  auto cfg = small_config(SyncPolicy::fixed(10));
  cfg.replay_capacity = 4;
  EXPECT_THROW(Agent<NeuralBackend>(small_net(), cfg), ConfigError);
  cfg = small_config(SyncPolicy::fixed(10));
  cfg.gamma = 1.0;
  EXPECT_THROW(Agent<NeuralBackend>(small_net(), cfg), ConfigError);
}

TEST(Evaluate, OptimalTableScoresShortestPath) {
  auto env = grid4();
  const auto mdp = env.enumerate_mdp();
  const auto q_star = value_iteration(mdp, 0.9, 1e-10);
  const int d = oracle::bfs_distance_to_terminal(mdp)[static_cast<std::size_t>(env.start_state())];
  const double optimal = (d - 1) * -0.01 + 1.0;
  const auto r = evaluate(q_star, env, 20, 0.0, 4);
  for (double x : r.returns) EXPECT_DOUBLE_EQ(x, optimal);
  EXPECT_DOUBLE_EQ(r.mean_return, optimal);

  auto probe = grid4();
  const auto random = evaluate(init_params({16, 8, 4}, 3), probe, 20, 0.0, 4);
  EXPECT_LE(random.mean_return, optimal + 1e-12);
}

TEST(Evaluate, SameSeedSameReturns) {
  auto env_a = grid4(1);
  auto env_b = grid4(1);
  const auto p = init_params({16, 8, 4}, 1);
  EXPECT_EQ(evaluate(p, env_a, 10, 0.5, 9).returns, evaluate(p, env_b, 10, 0.5, 9).returns);
}
