#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "asdqn/rng.hpp"

namespace asdqn {

/// One experience (s, a, r, s', terminal). States are stored as ids and
/// encoded when a batch is assembled.
struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  bool terminal = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

using Batch = std::vector<Transition>;

/// Fixed-capacity FIFO store. Once full, every push overwrites the oldest
/// element. Sampling draws uniformly with replacement.
template <typename T = Transition>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    storage_.reserve(capacity);
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return storage_.size(); }
  bool empty() const noexcept { return storage_.empty(); }
  bool full() const noexcept { return storage_.size() == capacity_; }

  void push(const T& item) {
    if (storage_.size() < capacity_) {
      storage_.push_back(item);
    } else {
      storage_[cursor_] = item;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// i-th element in insertion order, 0 = oldest still held.
  const T& chronological(std::size_t i) const {
    if (i >= storage_.size()) throw std::out_of_range("ReplayBuffer: index out of range");
    const std::size_t oldest = full() ? cursor_ : 0;
    return storage_[(oldest + i) % capacity_];
  }

  std::vector<T> contents() const {
    std::vector<T> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(chronological(i));
    return out;
  }

  std::vector<T> sample(std::size_t batch_size, Rng& rng) const {
    if (storage_.empty()) throw std::logic_error("ReplayBuffer: cannot sample from an empty buffer");
    if (batch_size == 0) throw std::invalid_argument("ReplayBuffer: batch_size must be positive");
    std::vector<T> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      batch.push_back(storage_[uniform_index(rng, storage_.size())]);
    }
    return batch;
  }

 private:
  std::size_t capacity_;
  std::vector<T> storage_;
  std::size_t cursor_ = 0;
};

}  // namespace asdqn
