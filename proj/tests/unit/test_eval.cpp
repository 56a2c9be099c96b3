#include <cmath>
#include <deque>
#include <unordered_map>

#include "doctest.h"
#include "dqp/collect/collect.hpp"
#include "dqp/eval/eval.hpp"
#include "dqp/learn/qlearn.hpp"

using namespace dqp;
using eval::EpisodeConfig;
using eval::EpisodeResult;
using grid::GameState;
using grid::Subgoal;

namespace {

const char* kThreeGems =
    "wwwwwwww\n"
    "wA-.x--w\n"
    "w-o-.x-w\n"
    "w.x--.ew\n"
    "wwwwwwww\n";

EpisodeConfig needing(int gems) {
  EpisodeConfig cfg;
  cfg.gems_needed = gems;
  return cfg;
}

nn::ArchSpec tiny_arch(int side = 0) {
  nn::ArchSpec a;
  a.convs = {{2, 4, 2}, {3, 4, 2}, {2, 3, 1}};
  a.hidden = {4};
  a.side = side;
  return a;
}

// Fewest actions that finish the level, by breadth-first search over game states.
int bfs_optimum(const grid::LevelSpec& level, int gems_needed) {
  const GameState start = grid::initial_state(level, gems_needed);
  std::unordered_map<GameState, int> dist{{start, 0}};
  std::deque<GameState> queue{start};
  while (!queue.empty()) {
    const GameState s = queue.front();
    queue.pop_front();
    const int d = dist[s];
    for (grid::Action a : grid::kAllActions) {
      const GameState n = grid::apply_action(s, a);
      if (n.exited) return d + 1;
      if (dist.emplace(n, d + 1).second) queue.push_back(n);
    }
  }
  return -1;
}

}  // namespace

TEST_CASE("action coefficient is a geometric mean of ratios") {
  CHECK(eval::action_coefficient({10, 20, 30}, {10, 20, 30}) == doctest::Approx(1.0));
  CHECK(eval::action_coefficient({50, 100}, {100, 100}) == doctest::Approx(std::sqrt(0.5)));
  CHECK(eval::action_coefficient({50, 100}, {100, 100}) == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK_THROWS_AS(eval::action_coefficient({1, 2}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(eval::action_coefficient({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(eval::action_coefficient({0}, {1}), std::invalid_argument);
}

TEST_CASE("action coefficient is scale invariant") {
  const std::vector<double> m{12, 40, 7, 99}, rm{30, 41, 20, 150};
  const double base = eval::action_coefficient(m, rm);
  for (double k : {0.5, 3.0, 1e3}) {
    std::vector<double> ms = m, rms = rm;
    for (double& v : ms) v *= k;
    for (double& v : rms) v *= k;
    CHECK(eval::action_coefficient(ms, rms) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("EXIT ranked first before the gate opens costs one error per selection") {
  const grid::LevelSpec level = grid::parse_level(kThreeGems);
  eval::Selector exit_first = [](const GameState& s) {
    auto goals = grid::formulate_goals(s).subgoals;
    std::rotate(goals.rbegin(), goals.rbegin() + 1, goals.rend());
    return goals;
  };
  const EpisodeResult one = eval::run_subgoal_episode(level, exit_first, needing(1));
  CHECK(one.solved);
  CHECK(one.goal_selection_errors == 1);
  CHECK(one.subgoals == 2);  // first gem (row-major), then the exit
  const EpisodeResult three = eval::run_subgoal_episode(level, exit_first, needing(3));
  CHECK(three.solved);
  CHECK(three.goal_selection_errors == 3);
  CHECK(three.subgoals == 4);
  CHECK(eval::replay_solves(level, three.actions, 3));
  CHECK(three.total_actions == static_cast<int>(three.actions.size()));
  CHECK(three.planning_time > 0);
}

TEST_CASE("episode length is the sum of its plans") {
  const grid::LevelSpec level = grid::parse_level(kThreeGems);
  int planned = 0;
  const EpisodeConfig cfg = needing(2);
  eval::Selector in_order = [&](const GameState& s) {
    auto goals = grid::formulate_goals(s).subgoals;
    // Mirror what the agent will execute to add up the plan lengths.
    for (const Subgoal& g : goals) {
      const auto p = planner::plan_subgoal(s, g, cfg.planner);
      if (p.status == planner::Status::kSolved) {
        planned += static_cast<int>(p.actions.size());
        break;
      }
    }
    return goals;
  };
  const EpisodeResult r = eval::run_subgoal_episode(level, in_order, cfg);
  CHECK(r.solved);
  CHECK(r.total_actions == planned);
  CHECK(r.goal_selection_errors == 0);
}

TEST_CASE("DQP episodes solve generated levels and replay cleanly") {
  collect::GenConfig gen;
  gen.seed = 3;
  const grid::LevelSpec level = collect::gen_level(gen);
  const nn::Network net(tiny_arch(), 4);
  const EpisodeResult r = eval::run_dqp_episode(level, net, {});
  CHECK(r.model == "dqp");
  CHECK(r.solved);
  CHECK(r.subgoals >= 10);
  CHECK(eval::replay_solves(level, r.actions, 9));
  CHECK(r.goal_selection_time > 0);
  const EpisodeResult again = eval::run_dqp_episode(level, net, {});
  CHECK(again.actions == r.actions);
  CHECK(again.goal_selection_errors == r.goal_selection_errors);
}

TEST_CASE("random model episodes are reproducible and sometimes pick EXIT early") {
  const grid::LevelSpec level = grid::parse_level(kThreeGems);
  const EpisodeResult a = eval::run_random_episode(level, 11, needing(2));
  const EpisodeResult b = eval::run_random_episode(level, 11, needing(2));
  CHECK(a.solved);
  CHECK(a.actions == b.actions);
  CHECK(a.model == "rm");
  int errors = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EpisodeResult r = eval::run_random_episode(level, seed, needing(2));
    CHECK(r.solved);
    errors += r.goal_selection_errors;
  }
  CHECK(errors > 0);

  // No gems left: EXIT is the only choice.
  const grid::LevelSpec bare = grid::parse_level(
      "wwwww\n"
      "wA-ew\n"
      "wwwww\n");
  const EpisodeResult r = eval::run_random_episode(bare, 1, needing(0));
  CHECK(r.solved);
  CHECK(r.total_actions == 3);  // turn east, two steps
}

TEST_CASE("DQL episodes avoid loops and stop at the action cap") {
  const grid::LevelSpec level = grid::parse_level(kThreeGems);
  nn::Network flat(learn::action_arch(tiny_arch()), 1);
  flat.set_zero();
  flat.touch();
  const EpisodeResult capped = eval::run_dql_episode(level, flat, 1, 40, 2);
  CHECK(capped.total_actions == 40);
  CHECK(capped.model == "dql");
  // Equal Q-values: untried actions in declaration order, so the first
  // moves do not depend on the seed.
  const EpisodeResult other = eval::run_dql_episode(level, flat, 2, 40, 2);
  CHECK(std::equal(capped.actions.begin(), capped.actions.begin() + 5, other.actions.begin()));
  CHECK(capped.actions[0] == grid::Action::kUp);
  const EpisodeResult same = eval::run_dql_episode(level, flat, 1, 40, 2);
  CHECK(same.actions == capped.actions);

  const EpisodeResult long_run = eval::run_dql_episode(level, flat, 5, 2000, 2);
  if (long_run.solved) {
    CHECK(eval::replay_solves(level, long_run.actions, 2));
  } else {
    CHECK(long_run.total_actions == 2000);
  }
}

TEST_CASE("planner-only OPT matches breadth-first search over game states") {
  const grid::LevelSpec level = grid::parse_level(
      "wwwwwww\n"
      "wA-x-ww\n"
      "w-o---w\n"
      "wx-w-xw\n"
      "w--.-ew\n"
      "w-----w\n"
      "wwwwwww\n");
  const int optimum = bfs_optimum(level, 3);
  REQUIRE(optimum > 0);
  const EpisodeResult opt = eval::run_planner_only(level, {planner::Strategy::kOpt, 1, 60}, 3);
  CHECK(opt.solved);
  CHECK(opt.total_actions == optimum);
  CHECK(opt.model == "opt");
  const EpisodeResult wbfs = eval::run_planner_only(level, {planner::Strategy::kWbfs, 5, 60}, 3);
  CHECK(wbfs.solved);
  CHECK(wbfs.total_actions >= optimum);
}

TEST_CASE("planner-only timeouts are recorded as unsolved") {
  collect::GenConfig gen;
  gen.seed = 9;
  gen.boulder_density = 0.3;
  const grid::LevelSpec level = collect::gen_level(gen);
  const EpisodeResult r = eval::run_planner_only(level, {planner::Strategy::kOpt, 1, 0.05}, 9);
  CHECK_FALSE(r.solved);
  CHECK(r.timed_out);
  CHECK(r.total_actions == 0);
}

TEST_CASE("reports aggregate repetitions and mark unsolved cells") {
  std::vector<EpisodeResult> results;
  auto add = [&](std::string model, std::string level, bool solved, int length, std::uint64_t seed) {
    EpisodeResult r;
    r.model = model;
    r.level = level;
    r.solved = solved;
    r.total_actions = length;
    r.seed = seed;
    r.planning_time = 0.25;
    results.push_back(r);
  };
  add("dqp", "L0", true, 40, 0);
  add("dqp", "L0", true, 60, 1);
  add("rm", "L0", true, 100, 0);
  add("dqp", "L1", true, 30, 0);
  add("rm", "L1", true, 30, 0);
  add("opt", "L0", false, 0, 0);
  const eval::Report rep = eval::emit_report(results);
  REQUIRE(rep.cells.size() == 5);
  const auto& dqp0 = rep.cells[0];
  CHECK(dqp0.model == "dqp");
  CHECK(dqp0.level == "L0");
  CHECK(dqp0.length_mean == 50);
  CHECK(dqp0.length_std == doctest::Approx(std::sqrt(200.0)));
  bool single = false;
  for (const auto& c : rep.cells) {
    if (c.model == "rm" && c.level == "L1") {
      single = true;
      CHECK(c.length_std == 0);
    }
  }
  CHECK(single);
  REQUIRE(rep.coefficients.size() == 1);  // opt solved nothing
  CHECK(rep.coefficients[0].first == "dqp");
  CHECK(rep.coefficients[0].second == doctest::Approx(std::sqrt(0.5)));
  CHECK(rep.rows.find("dqp,L0,1,40,0.250000,0,0\n") != std::string::npos);
  CHECK(rep.table.find(" | -") != std::string::npos);

  const eval::Report quiet = eval::emit_report(results, false);
  CHECK(quiet.rows.find("0.25") == std::string::npos);
  CHECK(quiet.rows.find("dqp,L0,1,40,0,0\n") != std::string::npos);
}
