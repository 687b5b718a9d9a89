#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "asdqn/agent.hpp"
#include "asdqn/env.hpp"
#include "asdqn/errors.hpp"
#include "asdqn/optimizer.hpp"
#include "asdqn/sync.hpp"
#include "asdqn/tabular.hpp"

namespace asdqn::harness {

using json = nlohmann::json;

enum class BackendKind { neural, tabular };

struct EnvBlock {
  std::string family = "gridworld";
  EnvParams params;
};

struct AgentBlock {
  BackendKind backend = BackendKind::neural;
  std::vector<int> hidden_layers{64, 64};
  OptimizerConfig optimizer;
  LearnConfig tabular;  // alpha / decay for the tabular backend; gamma comes from `gamma`
  ExplorationSchedule schedule{1.0, 0.05, 10'000};
  double gamma = 0.9;
  int batch_size = 32;
  std::int64_t min_fill = 1000;
  int learn_every = 1;
  std::size_t replay_capacity = 10'000;
  std::int64_t max_episode_steps = std::numeric_limits<std::int64_t>::max();
};

struct SyncBlock {
  std::vector<SyncKind> kinds{SyncKind::fixed};
  std::int64_t C = 500;
  std::optional<int> n;  // defaults to C

  SyncPolicy policy(SyncKind kind) const {
    if (kind == SyncKind::fixed) return SyncPolicy::fixed(C);
    return n ? SyncPolicy::adaptive(C, *n) : SyncPolicy::adaptive(C);
  }
};

struct RunBlock {
  int iterations = 20;
  std::int64_t train_steps_per_iteration = 5000;
  int eval_episodes = 100;
  double eval_epsilon = 0.001;
  std::vector<std::uint64_t> seeds{1};
};

struct OutputBlock {
  std::string directory = "runs";
  std::vector<std::string> formats{"csv", "jsonl"};
  bool wall_clock = false;  // fill the `seconds` column; makes iterations.csv non-reproducible
};

struct ExperimentConfig {
  EnvBlock env;
  AgentBlock agent;
  SyncBlock sync;
  RunBlock run;
  OutputBlock output;

  /// TrainConfig for one (variant, seed) cell.
  TrainConfig train_config(SyncKind kind, std::uint64_t seed) const {
    TrainConfig tc;
    tc.total_steps = static_cast<std::int64_t>(run.iterations) * run.train_steps_per_iteration;
    tc.max_episode_steps = agent.max_episode_steps;
    tc.gamma = agent.gamma;
    tc.batch_size = agent.batch_size;
    tc.min_fill = agent.min_fill;
    tc.learn_every = agent.learn_every;
    tc.replay_capacity = agent.replay_capacity;
    tc.explore = agent.schedule;
    tc.sync = sync.policy(kind);
    tc.seed = seed;
    return tc;
  }
};

namespace detail {

/// Strict reader over one JSON object: every key must be consumed, and every
/// error names its dotted path.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  bool has(const std::string& name) const { return node_.contains(name); }

  const json& raw(const std::string& name) {
    seen_.insert(name);
    return node_.at(name);
  }

  Reader child(const std::string& name) {
    if (!has(name)) return Reader(empty_object(), key(name));
    return Reader(raw(name), key(name));
  }

  double number(const std::string& name, double fallback) {
    if (!has(name)) return fallback;
    const json& v = raw(name);
    if (!v.is_number()) throw ConfigError(key(name), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key(name), "must be finite");
    return d;
  }

  std::int64_t integer(const std::string& name, std::int64_t fallback) {
    if (!has(name)) return fallback;
    const json& v = raw(name);
    if (!v.is_number_integer()) throw ConfigError(key(name), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string string(const std::string& name, const std::string& fallback) {
    if (!has(name)) return fallback;
    const json& v = raw(name);
    if (!v.is_string()) throw ConfigError(key(name), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& name, bool fallback) {
    if (!has(name)) return fallback;
    const json& v = raw(name);
    if (!v.is_boolean()) throw ConfigError(key(name), "expected true or false");
    return v.get<bool>();
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }
  }

 private:
  static const json& empty_object() {
    static const json e = json::object();
    return e;
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline int positive_int(Reader& r, const std::string& name, std::int64_t fallback, std::int64_t max = 1'000'000'000) {
  const std::int64_t v = r.integer(name, fallback);
  if (v < 1 || v > max) throw ConfigError(r.key(name), "must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses and fully validates an experiment config. The environment is
/// instantiated once so family parameters are checked before any run starts.
inline ExperimentConfig parse_config(const json& doc) {
  using detail::Reader;
  ExperimentConfig cfg;
  Reader root(doc, "");

  {
    Reader env = root.child("env");
    cfg.env.family = env.string("family", cfg.env.family);
    if (env.has("params")) {
      const json& params = env.raw("params");
      if (!params.is_object()) throw ConfigError("env.params", "expected an object");
      for (auto it = params.begin(); it != params.end(); ++it) {
        if (!it.value().is_number()) throw ConfigError("env.params." + it.key(), "expected a number");
        cfg.env.params[it.key()] = it.value().get<double>();
      }
    }
    env.finish();
  }

  {
    Reader agent = root.child("agent");
    const std::string backend = agent.string("backend", "neural");
    if (backend == "neural") {
      cfg.agent.backend = BackendKind::neural;
    } else if (backend == "tabular") {
      cfg.agent.backend = BackendKind::tabular;
    } else {
      throw ConfigError("agent.backend", "expected 'neural' or 'tabular'");
    }
    if (agent.has("hidden_layers")) {
      const json& h = agent.raw("hidden_layers");
      if (!h.is_array()) throw ConfigError("agent.hidden_layers", "expected an array of widths");
      cfg.agent.hidden_layers.clear();
      for (const auto& w : h) {
        if (!w.is_number_integer() || w.get<std::int64_t>() < 1 || w.get<std::int64_t>() > 1 << 16) {
          throw ConfigError("agent.hidden_layers", "widths must be positive integers");
        }
        cfg.agent.hidden_layers.push_back(w.get<int>());
      }
    }
    {
      Reader opt = agent.child("optimizer");
      auto& o = cfg.agent.optimizer;
      o.kind = parse_optimizer_kind(opt.string("kind", to_string(o.kind)));
      o.learning_rate = opt.number("learning_rate", o.learning_rate);
      o.decay = opt.number("decay", o.decay);
      o.beta1 = opt.number("beta1", o.beta1);
      o.beta2 = opt.number("beta2", o.beta2);
      o.epsilon = opt.number("epsilon", o.epsilon);
      o.clip_norm = opt.number("clip_norm", o.clip_norm);
      opt.finish();
      o.validate();
    }
    {
      Reader sched = agent.child("schedule");
      auto& s = cfg.agent.schedule;
      s.eps_start = sched.number("eps_start", s.eps_start);
      s.eps_end = sched.number("eps_end", s.eps_end);
      s.decay_steps = sched.integer("decay_steps", s.decay_steps);
      sched.finish();
      s.validate();
    }
    cfg.agent.tabular.alpha = agent.number("alpha", cfg.agent.tabular.alpha);
    if (!(cfg.agent.tabular.alpha > 0.0 && cfg.agent.tabular.alpha <= 1.0)) {
      throw ConfigError("agent.alpha", "must be in (0, 1]");
    }
    const std::string decay = agent.string("alpha_decay", "constant");
    if (decay == "constant") {
      cfg.agent.tabular.decay = AlphaDecay::constant;
    } else if (decay == "inverse_count") {
      cfg.agent.tabular.decay = AlphaDecay::inverse_count;
    } else {
      throw ConfigError("agent.alpha_decay", "expected 'constant' or 'inverse_count'");
    }
    cfg.agent.gamma = agent.number("gamma", cfg.agent.gamma);
    if (!(cfg.agent.gamma > 0.0 && cfg.agent.gamma < 1.0)) throw ConfigError("agent.gamma", "must be in (0, 1)");
    cfg.agent.tabular.gamma = cfg.agent.gamma;
    cfg.agent.batch_size = detail::positive_int(agent, "batch_size", cfg.agent.batch_size, 1 << 20);
    cfg.agent.min_fill = agent.integer("min_fill", cfg.agent.min_fill);
    if (cfg.agent.min_fill < 0) throw ConfigError("agent.min_fill", "must be >= 0");
    cfg.agent.learn_every = detail::positive_int(agent, "learn_every", cfg.agent.learn_every);
    cfg.agent.replay_capacity =
        static_cast<std::size_t>(detail::positive_int(agent, "replay_capacity",
                                                      static_cast<std::int64_t>(cfg.agent.replay_capacity)));
    if (agent.has("max_episode_steps")) {
      cfg.agent.max_episode_steps = detail::positive_int(agent, "max_episode_steps", 1);
    }
    agent.finish();
  }

  {
    Reader sync = root.child("sync");
    if (sync.has("kind")) {
      const json& k = sync.raw("kind");
      cfg.sync.kinds.clear();
      if (k.is_string()) {
        cfg.sync.kinds.push_back(parse_sync_kind(k.get<std::string>()));
      } else if (k.is_array() && !k.empty()) {
        for (const auto& item : k) {
          if (!item.is_string()) throw ConfigError("sync.kind", "expected strings");
          const SyncKind kind = parse_sync_kind(item.get<std::string>());
          for (SyncKind seen : cfg.sync.kinds) {
            if (seen == kind) throw ConfigError("sync.kind", "duplicate variant");
          }
          cfg.sync.kinds.push_back(kind);
        }
      } else {
        throw ConfigError("sync.kind", "expected a string or a non-empty array");
      }
    }
    cfg.sync.C = sync.integer("C", cfg.sync.C);
    if (cfg.sync.C < 1) throw ConfigError("sync.C", "check interval must be >= 1");
    if (sync.has("n")) {
      const std::int64_t n = sync.integer("n", 1);
      if (n < 1 || n > 10'000'000) throw ConfigError("sync.n", "must be a positive integer");
      cfg.sync.n = static_cast<int>(n);
    }
    sync.finish();
    for (SyncKind k : cfg.sync.kinds) (void)cfg.sync.policy(k);
  }

  {
    Reader run = root.child("run");
    cfg.run.iterations = detail::positive_int(run, "iterations", cfg.run.iterations, 1'000'000);
    cfg.run.train_steps_per_iteration = run.integer("train_steps_per_iteration", cfg.run.train_steps_per_iteration);
    if (cfg.run.train_steps_per_iteration < 1) {
      throw ConfigError("run.train_steps_per_iteration", "must be >= 1");
    }
    cfg.run.eval_episodes = detail::positive_int(run, "eval_episodes", cfg.run.eval_episodes, 10'000'000);
    cfg.run.eval_epsilon = run.number("eval_epsilon", cfg.run.eval_epsilon);
    if (cfg.run.eval_epsilon < 0.0 || cfg.run.eval_epsilon > 1.0) {
      throw ConfigError("run.eval_epsilon", "must be in [0, 1]");
    }
    if (run.has("seeds")) {
      const json& s = run.raw("seeds");
      if (!s.is_array() || s.empty()) throw ConfigError("run.seeds", "expected a non-empty array");
      cfg.run.seeds.clear();
      for (const auto& seed : s) {
        const bool non_negative =
            seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0);
        if (!non_negative) throw ConfigError("run.seeds", "seeds must be non-negative integers");
        const auto v = seed.get<std::uint64_t>();
        for (auto existing : cfg.run.seeds) {
          if (existing == v) throw ConfigError("run.seeds", "duplicate seed");
        }
        cfg.run.seeds.push_back(v);
      }
    }
    run.finish();
  }

  {
    Reader out = root.child("output");
    cfg.output.directory = out.string("directory", cfg.output.directory);
    if (cfg.output.directory.empty()) throw ConfigError("output.directory", "must not be empty");
    if (out.has("formats")) {
      const json& f = out.raw("formats");
      if (!f.is_array()) throw ConfigError("output.formats", "expected an array");
      cfg.output.formats.clear();
      for (const auto& item : f) {
        if (!item.is_string() || (item != "csv" && item != "jsonl")) {
          throw ConfigError("output.formats", "supported formats are 'csv' and 'jsonl'");
        }
        cfg.output.formats.push_back(item.get<std::string>());
      }
    }
    cfg.output.wall_clock = out.boolean("wall_clock", cfg.output.wall_clock);
    out.finish();
  }

  root.finish();

  // Cross-module checks against a real environment and the training loop.
  const Environment probe = make_env(cfg.env.family, cfg.env.params, 0);
  (void)probe;
  for (SyncKind k : cfg.sync.kinds) cfg.train_config(k, 0).validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return parse_config(doc);
}

/// Resolved config with every default filled in, as written to manifests.
inline json to_json(const ExperimentConfig& cfg) {
  json env_params = json::object();
  for (const auto& [k, v] : cfg.env.params) env_params[k] = v;
  json kinds = json::array();
  for (SyncKind k : cfg.sync.kinds) kinds.push_back(to_string(k));
  const auto& a = cfg.agent;
  json agent = {
      {"backend", a.backend == BackendKind::neural ? "neural" : "tabular"},
      {"hidden_layers", a.hidden_layers},
      {"optimizer",
       {{"kind", to_string(a.optimizer.kind)},
        {"learning_rate", a.optimizer.learning_rate},
        {"decay", a.optimizer.decay},
        {"beta1", a.optimizer.beta1},
        {"beta2", a.optimizer.beta2},
        {"epsilon", a.optimizer.epsilon},
        {"clip_norm", a.optimizer.clip_norm}}},
      {"schedule",
       {{"eps_start", a.schedule.eps_start}, {"eps_end", a.schedule.eps_end}, {"decay_steps", a.schedule.decay_steps}}},
      {"alpha", a.tabular.alpha},
      {"alpha_decay", a.tabular.decay == AlphaDecay::constant ? "constant" : "inverse_count"},
      {"gamma", a.gamma},
      {"batch_size", a.batch_size},
      {"min_fill", a.min_fill},
      {"learn_every", a.learn_every},
      {"replay_capacity", a.replay_capacity},
  };
  if (a.max_episode_steps != std::numeric_limits<std::int64_t>::max()) agent["max_episode_steps"] = a.max_episode_steps;
  json sync = {{"kind", kinds}, {"C", cfg.sync.C}};
  if (cfg.sync.n) sync["n"] = *cfg.sync.n;
  return {
      {"env", {{"family", cfg.env.family}, {"params", env_params}}},
      {"agent", agent},
      {"sync", sync},
      {"run",
       {{"iterations", cfg.run.iterations},
        {"train_steps_per_iteration", cfg.run.train_steps_per_iteration},
        {"eval_episodes", cfg.run.eval_episodes},
        {"eval_epsilon", cfg.run.eval_epsilon},
        {"seeds", cfg.run.seeds}}},
      {"output",
       {{"directory", cfg.output.directory}, {"formats", cfg.output.formats}, {"wall_clock", cfg.output.wall_clock}}},
  };
}

}  // namespace asdqn::harness
