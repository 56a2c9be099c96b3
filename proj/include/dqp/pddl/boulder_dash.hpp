#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/pddl/ast.hpp"
#include "dqp/pddl/task.hpp"

namespace dqp::pddl::bd {

const std::string& domain_text();
const DomainDef& domain();  // parsed once

std::string cell_name(grid::Cell c);  // c_X_Y

// Single-subgoal problem. The gem counter only runs as far as the subgoal
// needs: one pickup for a GEM goal, none for EXIT. Other gems therefore act
// as obstacles, and EXIT with too few gems is unreachable even when relaxed.
// Throws std::invalid_argument when a GEM goal names a cell without a gem.
ProblemDef make_problem(const grid::GameState& s, const grid::Subgoal& goal);
std::string emit_problem(const grid::GameState& s, const grid::Subgoal& goal);

// Whole-level problem (goal: exited) with the full counter chain.
ProblemDef make_level_problem(const grid::GameState& s);

// Object name of the gem at `c` in problems emitted for `s` (gemK, row-major).
std::string gem_object(const grid::GameState& s, grid::Cell c);

// Game action corresponding to a ground action of this domain.
grid::Action game_action(const GroundAction& a);
std::vector<grid::Action> game_actions(const GroundTask& task, const std::vector<int>& plan);

// Reads a planner state (true atom indices of `task`) back into a game state.
// `origin` is the state the task was emitted from; it provides walls and the
// object numbering.
grid::GameState decode_state(const GroundTask& task, const std::vector<int>& true_atoms,
                             const grid::GameState& origin);

}  // namespace dqp::pddl::bd
