#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/nn/network.hpp"
#include "dqp/planner.hpp"

namespace dqp::eval {

struct EpisodeResult {
  std::string model;
  std::string level;
  std::uint64_t seed = 0;
  bool solved = false;
  bool timed_out = false;
  int total_actions = 0;
  double goal_selection_time = 0.0;  // seconds
  double planning_time = 0.0;
  int goal_selection_errors = 0;
  int subgoals = 0;  // plans executed
  double wall_time = 0.0;
  std::vector<grid::Action> actions;  // executed, in order
};

struct EpisodeConfig {
  planner::SearchConfig planner{planner::Strategy::kWbfs, 5, 60.0};
  int gems_needed = grid::kDefaultGemsNeeded;
};

// Orders the subgoals of a state; the agent tries them in this order until
// one is solvable, counting every Unsolvable answer as a goal selection error.
using Selector = std::function<std::vector<grid::Subgoal>(const grid::GameState&)>;

EpisodeResult run_subgoal_episode(const grid::LevelSpec& level, const Selector& select, const EpisodeConfig& cfg);
// Lowest Q first.
EpisodeResult run_dqp_episode(const grid::LevelSpec& level, const nn::Network& net, const EpisodeConfig& cfg);
// Uniformly random order.
EpisodeResult run_random_episode(const grid::LevelSpec& level, std::uint64_t seed, const EpisodeConfig& cfg);

// Greedy in Q with loop avoidance: in every state the best action not yet
// tried there; once all five were tried, a uniformly random one.
EpisodeResult run_dql_episode(const grid::LevelSpec& level, const nn::Network& net, std::uint64_t seed,
                              int max_actions = 2000, int gems_needed = grid::kDefaultGemsNeeded);

// One whole-level search (goal: exited).
EpisodeResult run_planner_only(const grid::LevelSpec& level, const planner::SearchConfig& search,
                               int gems_needed = grid::kDefaultGemsNeeded);

// Replays the actions from the initial state; true iff the level ends
// exactly after the last one.
bool replay_solves(const grid::LevelSpec& level, const std::vector<grid::Action>& actions, int gems_needed);

// Geometric mean of model / random-model length over levels. Throws
// std::invalid_argument on size mismatch, empty input or nonpositive lengths.
double action_coefficient(const std::vector<double>& model_lengths, const std::vector<double>& rm_lengths);

struct CellStats {
  std::string model;
  std::string level;
  int reps = 0;
  int solved = 0;
  double length_mean = 0, length_std = 0;  // over solved repetitions
  double time_mean = 0, time_std = 0;      // goal selection + planning
  double errors_mean = 0;
};

struct Report {
  std::vector<CellStats> cells;
  // Per model (other than "rm"): action coefficient against "rm" over levels
  // both solved at least once; absent when there is no such level.
  std::vector<std::pair<std::string, double>> coefficients;
  std::string rows;   // one line per episode
  std::string table;  // human readable
};

// Sample standard deviation; a single repetition reports 0. Unsolved cells
// print as "-". With include_timing false all times are left out so that
// reports of identical runs are byte-identical.
Report emit_report(const std::vector<EpisodeResult>& results, bool include_timing = true);

}  // namespace dqp::eval
