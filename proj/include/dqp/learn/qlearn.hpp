#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/nn/network.hpp"

namespace dqp::learn {

// Subgoal-level sample (s, g, r, s'). r is the plan length when g was
// attainable (with the final reward added on the level-completing sample)
// and the penalization value otherwise; s' is empty in both latter cases.
struct TransitionG {
  grid::GameState s;
  grid::Subgoal g;
  double r = 0.0;
  std::optional<grid::GameState> next;
  int level = 0;
};

// Action-level sample for the baseline: r = -1 per step, 5 and no next
// state on completion.
struct TransitionA {
  grid::GameState s;
  grid::Action a = grid::Action::kUp;
  double r = -1.0;
  std::optional<grid::GameState> next;
  int level = 0;
};

struct TrainerConfig {
  double gamma = 0.7;
  double penalty = 200.0;        // lambda
  double final_reward = -200.0;  // r_f
  std::int64_t tau = 10000;      // target sync period
  double lr = 1e-5;
  int batch = 32;
  std::int64_t iterations = 1'200'000;
  bool double_q = true;
  bool importance_weights = true;
  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;
  double per_eps = 1e-3;
  // Bootstrap targets are cached per next state; the online argmin is
  // recomputed this often (target values only change at syncs).
  std::int64_t argmin_refresh = 5000;
  std::int64_t log_every = 1000;
  // Recompute batch norm running statistics over the whole dataset before
  // every target sync, argmin refresh and at the end of training.
  bool precise_bn = true;

  static TrainerConfig dqp() { return {}; }
  static TrainerConfig dql();
  void validate() const;  // throws std::invalid_argument
};

// One Q-value per subgoal of g_s, same order, computed in infer mode.
std::vector<std::pair<grid::Subgoal, double>> q_values_g(const nn::Network& net, const grid::GameState& s,
                                                         const grid::CompoundSubgoal& g_s);
// All subgoals of the state by ascending Q; ties keep formulate_goals order
// (gems row-major, EXIT last).
std::vector<grid::Subgoal> rank_subgoals(const nn::Network& net, const grid::GameState& s);
grid::Subgoal select_subgoal(const nn::Network& net, const grid::GameState& s);

// Q(s, a) for UP, DOWN, LEFT, RIGHT, USE.
std::array<double, 5> q_values_a(const nn::Network& net, const grid::GameState& s);

// Index of the smallest / largest value; first one on ties.
std::size_t argmin_index(const std::vector<double>& values);
std::size_t argmax_index(const std::vector<double>& values);

double q_target_g(const TransitionG& t, const nn::Network& online, const nn::Network& target,
                  const TrainerConfig& cfg);
double q_target_a(const TransitionA& t, const nn::Network& online, const nn::Network& target,
                  const TrainerConfig& cfg);

struct TrainLogRow {
  std::int64_t iteration = 0;
  double loss = 0.0;         // mean weighted squared error since the previous row
  double mean_abs_td = 0.0;  // mean |TD error| since the previous row
};

struct TrainResult {
  nn::Network net;
  nn::Adam adam;
  std::vector<TrainLogRow> log;
  std::vector<std::int64_t> syncs;  // iterations (0-based count of completed steps) at which target <- online
};

struct TrainHooks {
  // Called after every optimizer step with the number of completed steps.
  std::function<void(std::int64_t, const nn::Network& online, const nn::Network& target)> after_step;
};

// Offline training from a fixed dataset. Throws nn::NumericError on a
// non-finite loss.
TrainResult train_g(const std::vector<TransitionG>& data, const nn::ArchSpec& arch, const TrainerConfig& cfg,
                    std::uint64_t seed, const TrainHooks& hooks = {});
TrainResult train_a(const std::vector<TransitionA>& data, const nn::ArchSpec& arch, const TrainerConfig& cfg,
                    std::uint64_t seed, const TrainHooks& hooks = {});

// Architecture used for each model (side features only for the baseline).
nn::ArchSpec subgoal_arch(nn::ArchSpec base);
nn::ArchSpec action_arch(nn::ArchSpec base);

}  // namespace dqp::learn
