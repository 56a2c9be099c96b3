#include <chrono>

#include "dqp/pddl/boulder_dash.hpp"
#include "dqp/planner.hpp"

namespace dqp::planner {

namespace {

SubgoalPlan run(const pddl::ProblemDef& problem, const SearchConfig& config,
                std::chrono::steady_clock::time_point start) {
  const pddl::GroundTask task = pddl::ground(pddl::bd::domain(), problem);
  SearchConfig budget = config;
  const double spent = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  budget.timeout_s = std::max(1e-3, config.timeout_s - spent);
  const PlanOutcome outcome = solve(task, budget);
  SubgoalPlan out;
  out.status = outcome.status;
  out.expanded = outcome.expanded;
  if (outcome.status == Status::kSolved) out.actions = pddl::bd::game_actions(task, outcome.plan.actions);
  out.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

SubgoalPlan plan_subgoal(const grid::GameState& s, const grid::Subgoal& goal, const SearchConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  return run(pddl::bd::make_problem(s, goal), config, start);
}

SubgoalPlan plan_level(const grid::GameState& s, const SearchConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  return run(pddl::bd::make_level_problem(s), config, start);
}

}  // namespace dqp::planner
