#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "slacksac/error.hpp"

namespace slacksac {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;       // failure: no bootstrapping
  bool truncated = false;  // time limit: bootstrap normally
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    auto finite = [](const Eigen::VectorXd& v) { return v.allFinite(); };
    if (!finite(t.state) || !finite(t.action) || !finite(t.next_state) || !std::isfinite(t.reward))
      throw NumericError("transition has non-finite fields");
    if (t.action.size() > 0 && t.action.cwiseAbs().maxCoeff() > 1.0)
      throw NumericError("transition action outside [-1, 1]");
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[write_index_] = std::move(t);
    }
    write_index_ = (write_index_ + 1) % capacity_;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  std::size_t write_index() const { return write_index_; }

  /// Transitions are addressed by storage slot; slot `write_index()` holds
  /// the oldest entry once the buffer is full.
  const Transition& operator[](std::size_t i) const { return storage_[i]; }

  /// Oldest first.
  std::vector<const Transition*> in_order() const {
    std::vector<const Transition*> out;
    const std::size_t start = storage_.size() < capacity_ ? 0 : write_index_;
    for (std::size_t k = 0; k < storage_.size(); ++k) out.push_back(&storage_[(start + k) % storage_.size()]);
    return out;
  }

  void restore(std::vector<Transition> ordered) {
    if (ordered.size() > capacity_) throw ConfigError("restored transitions exceed capacity");
    storage_ = std::move(ordered);
    write_index_ = storage_.size() % capacity_;
  }

  /// floor(size/2) distinct slots, uniformly without replacement, split into
  /// batches of `batch_max` (the last one possibly shorter).
  template <class Rng>
  std::vector<std::vector<std::size_t>> sample_epoch(std::size_t batch_max, Rng& rng) const {
    if (batch_max == 0) throw ConfigError("batch_max must be positive");
    const std::size_t n = storage_.size();
    const std::size_t k = n / 2;
    std::vector<std::vector<std::size_t>> batches;
    if (k == 0) return batches;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    for (std::size_t begin = 0; begin < k; begin += batch_max) {
      const std::size_t end = std::min(k, begin + batch_max);
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                           idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t write_index_ = 0;
};

}  // namespace slacksac
