#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jap/environment.hpp"
#include "jap/rng.hpp"

namespace jap {

/// One stored environment step (s, a, r, s', done).
struct TransitionSample {
  GraphPtr s;
  Assignment a;
  std::size_t action_index = 0;  // position of `a` in s->selection()
  double r = 1.0;
  GraphPtr s_next;
  bool done = false;
};

class EmptyBuffer : public std::logic_error {
 public:
  EmptyBuffer() : std::logic_error("EmptyBuffer: cannot sample from an empty replay buffer") {}
};

/// Capacity-bounded prioritized replay.
///
/// Item i is drawn with probability P(i) = p_i^alpha / sum_j p_j^alpha and
/// carries importance weight w_i = (N P(i))^-beta / max_j (N P(j))^-beta, with
/// the maximum taken over the whole buffer so that 0 < w_i <= 1. Priorities
/// are p_i = |delta_i| + per_epsilon once a TD error is known; new items enter
/// with the largest priority currently stored (1 for an empty buffer). When
/// full, the oldest item is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000, double alpha = 0.6, double beta = 0.4,
                        double per_epsilon = 1e-6);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double per_epsilon() const { return per_epsilon_; }

  /// Returns the slot the transition was written to.
  std::size_t insert(TransitionSample t);

  const TransitionSample& at(std::size_t i) const { return items_.at(i); }
  double priority(std::size_t i) const { return priorities_.at(i); }

  /// Sets p_i = |td_error| + per_epsilon.
  void update_priority(std::size_t i, double td_error);
  /// Sets p_i directly (must be positive).
  void set_priority(std::size_t i, double priority);

  struct Batch {
    std::vector<std::size_t> indices;
    std::vector<double> weights;
  };

  /// `count` independent draws with replacement. Throws EmptyBuffer.
  Batch sample(std::size_t count, Rng& rng) const;

  /// Closed-form P(i) over the current contents.
  std::vector<double> distribution() const;
  double importance_weight(std::size_t i) const;

 private:
  // Complete binary tree over the slots: sums and minima of p_i^alpha, maxima
  // of p_i. Unused leaves hold (0, +inf, 0).
  class Tree {
   public:
    void resize(std::size_t leaves);
    void set(std::size_t i, double scaled, double raw);
    double total() const { return sum_[1]; }
    double min_scaled() const { return min_[1]; }
    double max_raw() const { return max_[1]; }
    /// Smallest i whose prefix sum exceeds u.
    std::size_t find(double u) const;
    std::size_t leaves() const { return leaves_; }

   private:
    std::size_t leaves_ = 0;
    std::vector<double> sum_;
    std::vector<double> min_;
    std::vector<double> max_;
  };

  void write_priority(std::size_t i, double priority);

  std::size_t capacity_;
  double alpha_;
  double beta_;
  double per_epsilon_;
  std::vector<TransitionSample> items_;
  std::vector<double> priorities_;
  std::size_t next_ = 0;
  Tree tree_;
};

}  // namespace jap
