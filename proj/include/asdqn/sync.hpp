#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "asdqn/errors.hpp"

namespace asdqn {

/// Monotone nondecreasing, positive weights summing to one. The linear family
/// w_i = 2i / (n(n+1)) puts the most mass on the most recent reward.
struct WeightVector {
  std::vector<double> w;

  std::size_t n() const noexcept { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }
};

inline WeightVector make_weights(int n) {
  if (n < 1) throw ConfigError("sync.n", "weight vector length must be >= 1");
  WeightVector out;
  out.w.resize(static_cast<std::size_t>(n));
  const double denom = static_cast<double>(n) * (static_cast<double>(n) + 1.0);
  for (int i = 1; i <= n; ++i) out.w[static_cast<std::size_t>(i - 1)] = 2.0 * i / denom;
  return out;
}

/// Chronological ring of the last 2n per-step rewards. The first n entries
/// form the old half and the last n the new half.
class RewardQueue {
 public:
  explicit RewardQueue(int n) : n_(n) {
    if (n < 1) throw ConfigError("sync.n", "queue half-length must be >= 1");
    ring_.assign(static_cast<std::size_t>(2 * n), 0.0);
  }

  int half() const noexcept { return n_; }
  std::size_t capacity() const noexcept { return ring_.size(); }
  std::size_t size() const noexcept { return count_; }
  bool full() const noexcept { return count_ == ring_.size(); }

  void push(double r) {
    if (!std::isfinite(r)) throw std::invalid_argument("RewardQueue: reward must be finite");
    ring_[head_] = r;
    head_ = (head_ + 1) % ring_.size();
    if (count_ < ring_.size()) ++count_;
  }

  /// i-th element, 0 = oldest held.
  double at(std::size_t i) const {
    if (i >= count_) throw std::out_of_range("RewardQueue: index out of range");
    const std::size_t oldest = (head_ + ring_.size() - count_) % ring_.size();
    return ring_[(oldest + i) % ring_.size()];
  }

  std::vector<double> contents() const {
    std::vector<double> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < count_; ++i) out.push_back(at(i));
    return out;
  }

 private:
  int n_;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // next write slot
  std::size_t count_ = 0;
};

struct HalfAverages {
  double avg_old = 0.0;
  double avg_new = 0.0;
};

/// Weighted averages of both halves of a full queue; weight index 1 applies
/// to the oldest element of each half. The constant 1/n prefactor is left
/// out since it scales both sides of the comparison equally.
inline HalfAverages weighted_halves(const RewardQueue& q, const WeightVector& w) {
  if (!q.full()) throw std::logic_error("weighted_halves: queue is not full");
  if (w.n() != static_cast<std::size_t>(q.half())) {
    throw std::invalid_argument("weighted_halves: weight length does not match queue half");
  }
  const std::size_t n = w.n();
  HalfAverages out;
  for (std::size_t i = 0; i < n; ++i) {
    out.avg_old += w[i] * q.at(i);
    out.avg_new += w[i] * q.at(n + i);
  }
  return out;
}

enum class SyncKind { fixed, adaptive };

inline const char* to_string(SyncKind k) { return k == SyncKind::fixed ? "fixed" : "adaptive"; }

inline SyncKind parse_sync_kind(const std::string& s) {
  if (s == "fixed") return SyncKind::fixed;
  if (s == "adaptive") return SyncKind::adaptive;
  throw ConfigError("sync.kind", "expected 'fixed' or 'adaptive', got '" + s + "'");
}

/// Target-sync rule. Fixed: sync every C steps. Adaptive: at every C-th step,
/// sync only when the recent weighted reward average dropped strictly below
/// the preceding one; before 2n rewards exist, sync as the fixed rule would.
class SyncPolicy {
 public:
  static SyncPolicy fixed(std::int64_t C) { return SyncPolicy(SyncKind::fixed, C, 0); }
  static SyncPolicy adaptive(std::int64_t C, int n) { return SyncPolicy(SyncKind::adaptive, C, n); }
  /// Adaptive with n = C.
  static SyncPolicy adaptive(std::int64_t C) {
    if (C > 1'000'000) throw ConfigError("sync.n", "default n = C is too large; set sync.n");
    return SyncPolicy(SyncKind::adaptive, C, static_cast<int>(C));
  }

  SyncKind kind() const noexcept { return kind_; }
  std::int64_t C() const noexcept { return C_; }
  int n() const noexcept { return n_; }
  const WeightVector& weights() const noexcept { return weights_; }

  /// Queue sized for this policy. Fixed policies still get a (unused for
  /// decisions) queue of half-length max(n, 1) so callers can always log.
  RewardQueue make_queue() const { return RewardQueue(n_ > 0 ? n_ : 1); }

 private:
  SyncPolicy(SyncKind kind, std::int64_t C, int n) : kind_(kind), C_(C), n_(n) {
    if (C < 1) throw ConfigError("sync.C", "check interval must be >= 1");
    if (kind == SyncKind::adaptive) weights_ = make_weights(n);
  }

  SyncKind kind_;
  std::int64_t C_;
  int n_;
  WeightVector weights_;
};

struct SyncDecision {
  bool check_point = false;  // step is a multiple of C
  bool sync = false;
  std::optional<HalfAverages> averages;  // set only for a full-queue adaptive check
};

inline SyncDecision evaluate_sync(const SyncPolicy& policy, std::int64_t step, const RewardQueue& q) {
  if (step < 1) throw std::invalid_argument("should_sync: step must be >= 1");
  SyncDecision d;
  d.check_point = step % policy.C() == 0;
  if (!d.check_point) return d;
  if (policy.kind() == SyncKind::fixed || !q.full()) {
    d.sync = true;
    return d;
  }
  d.averages = weighted_halves(q, policy.weights());
  d.sync = d.averages->avg_new < d.averages->avg_old;
  return d;
}

inline bool should_sync(const SyncPolicy& policy, std::int64_t step, const RewardQueue& q) {
  return evaluate_sync(policy, step, q).sync;
}

}  // namespace asdqn
