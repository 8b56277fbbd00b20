#include "jap/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jap {

void ReplayBuffer::Tree::resize(std::size_t leaves) {
  std::size_t n = 1;
  while (n < leaves) n *= 2;
  const std::size_t old = leaves_;
  std::vector<double> sum(2 * n, 0.0), mn(2 * n, std::numeric_limits<double>::infinity()),
      mx(2 * n, 0.0);
  for (std::size_t i = 0; i < old; ++i) {
    sum[n + i] = sum_[old + i];
    mn[n + i] = min_[old + i];
    mx[n + i] = max_[old + i];
  }
  for (std::size_t i = n; i-- > 1;) {
    sum[i] = sum[2 * i] + sum[2 * i + 1];
    mn[i] = std::min(mn[2 * i], mn[2 * i + 1]);
    mx[i] = std::max(mx[2 * i], mx[2 * i + 1]);
  }
  leaves_ = n;
  sum_ = std::move(sum);
  min_ = std::move(mn);
  max_ = std::move(mx);
}

void ReplayBuffer::Tree::set(std::size_t i, double scaled, double raw) {
  std::size_t k = leaves_ + i;
  sum_[k] = scaled;
  min_[k] = scaled;
  max_[k] = raw;
  for (k /= 2; k >= 1; k /= 2) {
    sum_[k] = sum_[2 * k] + sum_[2 * k + 1];
    min_[k] = std::min(min_[2 * k], min_[2 * k + 1]);
    max_[k] = std::max(max_[2 * k], max_[2 * k + 1]);
  }
}

std::size_t ReplayBuffer::Tree::find(double u) const {
  std::size_t k = 1;
  while (k < leaves_) {
    if (u < sum_[2 * k] || sum_[2 * k + 1] <= 0.0) {
      k = 2 * k;
    } else {
      u -= sum_[2 * k];
      k = 2 * k + 1;
    }
  }
  return k - leaves_;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double alpha, double beta, double per_epsilon)
    : capacity_(capacity), alpha_(alpha), beta_(beta), per_epsilon_(per_epsilon) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  if (!(per_epsilon > 0.0)) throw std::invalid_argument("per_epsilon must be positive");
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("alpha and beta must be non-negative");
  tree_.resize(1);
}

void ReplayBuffer::write_priority(std::size_t i, double priority) {
  priorities_[i] = priority;
  tree_.set(i, std::pow(priority, alpha_), priority);
}

std::size_t ReplayBuffer::insert(TransitionSample t) {
  const double p = items_.empty() ? 1.0 : tree_.max_raw();
  std::size_t slot;
  if (items_.size() < capacity_) {
    slot = items_.size();
    items_.push_back(std::move(t));
    priorities_.push_back(p);
    if (items_.size() > tree_.leaves()) tree_.resize(items_.size());
  } else {
    slot = next_;
    items_[slot] = std::move(t);
  }
  next_ = (slot + 1) % capacity_;
  write_priority(slot, p);
  return slot;
}

void ReplayBuffer::update_priority(std::size_t i, double td_error) {
  set_priority(i, std::abs(td_error) + per_epsilon_);
}

void ReplayBuffer::set_priority(std::size_t i, double priority) {
  if (i >= items_.size()) throw std::out_of_range("replay index out of range");
  if (!(priority > 0.0) || !std::isfinite(priority))
    throw std::invalid_argument("priorities must be positive and finite");
  write_priority(i, priority);
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw EmptyBuffer();
  Batch batch;
  batch.indices.reserve(count);
  batch.weights.reserve(count);
  const double total = tree_.total();
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = tree_.find(rng.uniform() * total);
    if (i >= items_.size()) i = items_.size() - 1;
    batch.indices.push_back(i);
    batch.weights.push_back(importance_weight(i));
  }
  return batch;
}

std::vector<double> ReplayBuffer::distribution() const {
  std::vector<double> p(items_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] = std::pow(priorities_[i], alpha_);
  for (double& x : p) x /= total;
  return p;
}

double ReplayBuffer::importance_weight(std::size_t i) const {
  // (N P(i))^-beta / (N P_min)^-beta = (p_i^alpha / min_j p_j^alpha)^-beta
  const double scaled = std::pow(priorities_.at(i), alpha_);
  return std::pow(scaled / tree_.min_scaled(), -beta_);
}

}  // namespace jap
