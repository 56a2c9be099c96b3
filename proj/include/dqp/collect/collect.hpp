#pragma once

#include <cstdint>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/learn/qlearn.hpp"
#include "dqp/planner.hpp"

namespace dqp::collect {

struct GenConfig {
  int width = 26;
  int height = 13;
  int gem_count = 23;
  double boulder_density = 0.12;  // fraction of the cells left after gems, player and exit
  double dirt_density = 0.35;
  int gems_needed = grid::kDefaultGemsNeeded;
  int max_attempts = 1000;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Random level, rejected until native_solve reaches every gem and the exit
// (gate ignored) from the initial state, and every gem also while the exit
// already blocks the way. Throws GenerationError when attempts run out.
grid::LevelSpec gen_level(const GenConfig& cfg);
// The acceptance check alone.
bool level_reachable(const grid::LevelSpec& level, int gems_needed);

struct CollectConfig {
  planner::SearchConfig planner{planner::Strategy::kWbfs, 5, 10.0};
  int gems_needed = grid::kDefaultGemsNeeded;
  double penalty = 200.0;
  double final_reward = -200.0;
  int random_walk_max = 10;  // action-level collection: k uniform in 1..max
  // Gives up when this many consecutive picks add no new sample.
  int max_stale = 20000;
};

struct CollectStats {
  std::size_t planner_calls = 0;
  std::size_t planner_timeouts = 0;
  std::size_t episodes = 0;  // completed level runs
};

// Random subgoal exploration. Attainable samples are kept only once the run
// they belong to has finished the level; unattainable ones immediately.
// Unique on (state, subgoal); returns at most n samples.
std::vector<learn::TransitionG> collect_dqp(const grid::LevelSpec& level, std::size_t n, std::uint64_t seed,
                                            const CollectConfig& cfg = {}, CollectStats* stats = nullptr);

// Plan to a random subgoal, then 1..10 random actions, repeated. EXIT is only
// picked once it is attainable. Unique on (state incl. orientation, action).
std::vector<learn::TransitionA> collect_dql(const grid::LevelSpec& level, std::size_t n, std::uint64_t seed,
                                            const CollectConfig& cfg = {}, CollectStats* stats = nullptr);

// Every (s, g) sample over all states reachable by executing subgoal plans
// from the initial state (all subgoal orderings). Meant for small levels.
std::vector<learn::TransitionG> collect_exhaustive(const grid::LevelSpec& level, const CollectConfig& cfg = {},
                                                   CollectStats* stats = nullptr);

}  // namespace dqp::collect
