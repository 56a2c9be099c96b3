#pragma once

#include <climits>
#include <cstdint>
#include <string>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/pddl/task.hpp"

namespace dqp::planner {

inline constexpr int kInfinity = INT_MAX;

enum class Strategy { kOpt, kWbfs, kEhc };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);  // "opt", "wbfs", "ehc"

struct SearchConfig {
  Strategy strategy = Strategy::kWbfs;
  int weight = 5;  // WBFS only: f = g + weight * h
  double timeout_s = 3600.0;
};

enum class Status { kSolved, kUnsolvable, kTimeout };

std::string status_name(Status s);

struct Plan {
  std::vector<int> actions;  // indices into GroundTask::actions
  std::size_t length() const { return actions.size(); }
};

struct PlanOutcome {
  Status status = Status::kUnsolvable;
  Plan plan;
  double elapsed_s = 0.0;
  std::size_t expanded = 0;
  std::size_t generated = 0;
};

// Relaxed-plan length from the given state (true atom indices), or kInfinity
// when the goal is unreachable even without delete effects.
int h_ff(const pddl::GroundTask& task, const std::vector<int>& state);
// Depth of the deepest goal atom in the relaxed graph (admissible).
int h_max(const pddl::GroundTask& task, const std::vector<int>& state);

PlanOutcome solve(const pddl::GroundTask& task, const SearchConfig& config);

// Sequential simulation from init; true iff every precondition holds and the
// goal holds at the end.
bool validate(const pddl::GroundTask& task, const Plan& plan);

// Successor on explicit atom sets (sorted indices). Conditional effects are
// evaluated in the predecessor; deletes are applied before adds.
bool applicable(const pddl::GroundTask& task, const std::vector<int>& state, int action);
std::vector<int> successor(const pddl::GroundTask& task, const std::vector<int>& state, int action);

// "(name args)" per line followed by "; length = N".
std::string format_plan(const pddl::GroundTask& task, const Plan& plan);

struct NativeOptions {
  // Treat the nine-gem gate as open (used for level reachability checks).
  bool ignore_gate = false;
};

struct NativeOutcome {
  Status status = Status::kUnsolvable;
  std::vector<grid::Action> actions;
  std::size_t expanded = 0;
};

// Length-optimal A* directly on the game rules for one subgoal. Matches the
// single-subgoal problems: other gems block the way, and so does the exit
// while it would end the level.
NativeOutcome native_solve(const grid::GameState& s, const grid::Subgoal& goal,
                           const NativeOptions& options = {});

// Emits the single-subgoal problem for `s`, grounds it and searches. The
// elapsed time covers all three steps. Solved plans come back as game actions.
struct SubgoalPlan {
  Status status = Status::kUnsolvable;
  std::vector<grid::Action> actions;
  double elapsed_s = 0.0;
  std::size_t expanded = 0;
};

SubgoalPlan plan_subgoal(const grid::GameState& s, const grid::Subgoal& goal, const SearchConfig& config);
// Whole level, goal: exited.
SubgoalPlan plan_level(const grid::GameState& s, const SearchConfig& config);

}  // namespace dqp::planner
