#pragma once

#include "aoimix/error.hpp"
#include "aoimix/random.hpp"

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

namespace aoimix {

/// Fixed-capacity ring buffer of experiences. Once full, the oldest entry is
/// overwritten.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay buffer: capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// Storage slot i, not insertion order once the ring has wrapped.
  const T& operator[](std::size_t i) const { return items_.at(i); }

  /// batch_size distinct storage indices, uniformly at random (Floyd's
  /// algorithm). Empty when the buffer holds fewer than batch_size items.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const {
    std::vector<std::size_t> out;
    const std::size_t n = items_.size();
    if (batch_size == 0 || n < batch_size) return out;
    out.reserve(batch_size);
    for (std::size_t j = n - batch_size; j < n; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      if (std::find(out.begin(), out.end(), t) == out.end()) {
        out.push_back(t);
      } else {
        out.push_back(j);
      }
    }
    return out;
  }

  std::vector<T> sample(std::size_t batch_size, Rng& rng) const {
    std::vector<T> out;
    for (auto i : sample_indices(batch_size, rng)) out.push_back(items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<T> items_;
  std::size_t head_ = 0;
};

}  // namespace aoimix
