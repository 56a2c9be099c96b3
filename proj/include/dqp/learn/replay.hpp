#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dqp::learn {

// Proportional prioritized replay over a fixed set of samples (training is
// offline, so every sample is present from the start). Sampling probability
// of i is p_i^alpha / sum_j p_j^alpha.
class PrioritizedReplay {
 public:
  PrioritizedReplay(std::size_t size, double alpha, double eps, double initial_priority = 1.0);

  std::size_t size() const { return size_; }
  double total() const { return tree_[1]; }
  double probability(std::size_t i) const { return tree_[leaf_ + i] / total(); }

  // One independent draw.
  std::size_t sample(std::mt19937_64& rng) const;
  // Index whose cumulative mass interval contains u in [0, total()).
  std::size_t find(double u) const;

  // Priority becomes |td| + eps.
  void update(std::size_t i, double td_abs);
  void set_priority(std::size_t i, double priority);

  // (N * P(i))^-beta, not normalized.
  double weight(std::size_t i, double beta) const;

 private:
  void set_leaf(std::size_t i, double value);

  std::size_t size_;
  std::size_t leaf_;  // index of the first leaf
  double alpha_;
  double eps_;
  std::vector<double> tree_;  // implicit binary tree, root at 1
};

}  // namespace dqp::learn
