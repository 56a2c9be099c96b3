#include "dqp/learn/replay.hpp"

#include <cmath>
#include <stdexcept>

#include "dqp/rng.hpp"

namespace dqp::learn {

PrioritizedReplay::PrioritizedReplay(std::size_t size, double alpha, double eps, double initial_priority)
    : size_(size), alpha_(alpha), eps_(eps) {
  if (size == 0) throw std::invalid_argument("replay needs at least one sample");
  if (!(initial_priority > 0)) throw std::invalid_argument("priorities must be positive");
  leaf_ = 1;
  while (leaf_ < size) leaf_ <<= 1;
  tree_.assign(2 * leaf_, 0.0);
  const double p = std::pow(initial_priority, alpha_);
  for (std::size_t i = 0; i < size; ++i) tree_[leaf_ + i] = p;
  for (std::size_t n = leaf_ - 1; n >= 1; --n) tree_[n] = tree_[2 * n] + tree_[2 * n + 1];
}

std::size_t PrioritizedReplay::find(double u) const {
  std::size_t n = 1;
  while (n < leaf_) {
    const double left = tree_[2 * n];
    if (u < left) {
      n = 2 * n;
    } else {
      u -= left;
      n = 2 * n + 1;
    }
  }
  std::size_t i = n - leaf_;
  // Rounding can walk past the last real leaf; fall back to it.
  if (i >= size_) i = size_ - 1;
  while (tree_[leaf_ + i] <= 0 && i > 0) --i;
  return i;
}

std::size_t PrioritizedReplay::sample(std::mt19937_64& rng) const { return find(uniform01(rng) * total()); }

void PrioritizedReplay::update(std::size_t i, double td_abs) { set_priority(i, std::abs(td_abs) + eps_); }

void PrioritizedReplay::set_priority(std::size_t i, double priority) {
  if (!(priority > 0) || !std::isfinite(priority)) throw std::invalid_argument("priority must be positive and finite");
  set_leaf(i, std::pow(priority, alpha_));
}

void PrioritizedReplay::set_leaf(std::size_t i, double value) {
  std::size_t n = leaf_ + i;
  tree_[n] = value;
  // Recompute sums from the children instead of adding a delta, so that
  // rounding errors do not accumulate over millions of updates.
  for (n >>= 1; n >= 1; n >>= 1) tree_[n] = tree_[2 * n] + tree_[2 * n + 1];
}

double PrioritizedReplay::weight(std::size_t i, double beta) const {
  return std::pow(static_cast<double>(size_) * probability(i), -beta);
}

}  // namespace dqp::learn
