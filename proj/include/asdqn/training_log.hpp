#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asdqn/sync.hpp"

namespace asdqn {

struct SyncEvent {
  std::int64_t step = 0;
  bool synced = false;
  std::optional<double> avg_old;  // present only for full-queue adaptive checks
  std::optional<double> avg_new;

  friend bool operator==(const SyncEvent&, const SyncEvent&) = default;
};

struct StepRecord {
  int action = 0;
  double reward = 0.0;
  double epsilon = 0.0;
  std::optional<double> loss;  // set when a learning update ran on this step

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Everything a training run records. One SyncEvent per check point, in the
/// order they occurred; `target_updates` lists the steps at which the target
/// copy was overwritten.
struct TrainingLog {
  std::vector<double> episode_returns;
  std::vector<StepRecord> steps;
  std::vector<SyncEvent> sync_events;
  std::vector<std::int64_t> target_updates;

  void record_sync(std::int64_t step, const SyncDecision& d) {
    if (!d.check_point) return;
    SyncEvent ev{step, d.sync, std::nullopt, std::nullopt};
    if (d.averages) {
      ev.avg_old = d.averages->avg_old;
      ev.avg_new = d.averages->avg_new;
    }
    sync_events.push_back(ev);
    if (d.sync) target_updates.push_back(step);
  }

  friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

}  // namespace asdqn
