#include "dqp/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dqp/learn/qlearn.hpp"
#include "dqp/rng.hpp"

namespace dqp::eval {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

}  // namespace

EpisodeResult run_subgoal_episode(const grid::LevelSpec& level, const Selector& select, const EpisodeConfig& cfg) {
  const auto start = Clock::now();
  EpisodeResult r;
  grid::GameState s = grid::initial_state(level, cfg.gems_needed);
  while (!s.exited) {
    auto t = Clock::now();
    const std::vector<grid::Subgoal> order = select(s);
    r.goal_selection_time += since(t);

    bool progressed = false;
    for (const grid::Subgoal& g : order) {
      const planner::SubgoalPlan p = planner::plan_subgoal(s, g, cfg.planner);
      r.planning_time += p.elapsed_s;
      if (p.status == planner::Status::kTimeout) {
        r.timed_out = true;
        break;
      }
      if (p.status == planner::Status::kUnsolvable) {
        ++r.goal_selection_errors;
        continue;
      }
      for (grid::Action a : p.actions) s = grid::apply_action(s, a);
      r.actions.insert(r.actions.end(), p.actions.begin(), p.actions.end());
      ++r.subgoals;
      progressed = true;
      break;
    }
    if (!progressed) break;
  }
  r.solved = s.exited;
  r.total_actions = static_cast<int>(r.actions.size());
  r.wall_time = since(start);
  return r;
}

EpisodeResult run_dqp_episode(const grid::LevelSpec& level, const nn::Network& net, const EpisodeConfig& cfg) {
  EpisodeResult r = run_subgoal_episode(
      level, [&](const grid::GameState& s) { return learn::rank_subgoals(net, s); }, cfg);
  r.model = "dqp";
  return r;
}

EpisodeResult run_random_episode(const grid::LevelSpec& level, std::uint64_t seed, const EpisodeConfig& cfg) {
  std::mt19937_64 rng(seed);
  EpisodeResult r = run_subgoal_episode(
      level,
      [&](const grid::GameState& s) {
        auto goals = grid::formulate_goals(s).subgoals;
        for (std::size_t i = goals.size(); i > 1; --i) std::swap(goals[i - 1], goals[uniform_below(rng, i)]);
        return goals;
      },
      cfg);
  r.model = "rm";
  r.seed = seed;
  return r;
}

EpisodeResult run_dql_episode(const grid::LevelSpec& level, const nn::Network& net, std::uint64_t seed,
                              int max_actions, int gems_needed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  EpisodeResult r;
  r.model = "dql";
  r.seed = seed;
  grid::GameState s = grid::initial_state(level, gems_needed);
  std::unordered_map<grid::GameState, std::uint8_t> tried;  // bit per action
  while (!s.exited && static_cast<int>(r.actions.size()) < max_actions) {
    const auto t = Clock::now();
    const auto q = learn::q_values_a(net, s);
    std::uint8_t& mask = tried[s];
    int best = -1;
    for (int a = 0; a < 5; ++a) {
      if (mask & (1U << a)) continue;
      if (best < 0 || q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
    }
    if (best < 0) best = static_cast<int>(uniform_below(rng, 5));
    mask = static_cast<std::uint8_t>(mask | (1U << best));
    r.goal_selection_time += since(t);
    const grid::Action a = grid::kAllActions[best];
    s = grid::apply_action(s, a);
    r.actions.push_back(a);
  }
  r.solved = s.exited;
  r.total_actions = static_cast<int>(r.actions.size());
  r.wall_time = since(start);
  return r;
}

EpisodeResult run_planner_only(const grid::LevelSpec& level, const planner::SearchConfig& search, int gems_needed) {
  const auto start = Clock::now();
  EpisodeResult r;
  r.model = planner::strategy_name(search.strategy);
  const grid::GameState s = grid::initial_state(level, gems_needed);
  const planner::SubgoalPlan p = planner::plan_level(s, search);
  r.planning_time = p.elapsed_s;
  r.timed_out = p.status == planner::Status::kTimeout;
  if (p.status == planner::Status::kSolved) {
    r.actions = p.actions;
    r.solved = replay_solves(level, p.actions, gems_needed);
    if (!r.solved) throw std::logic_error("planner returned a plan that does not finish the level");
    r.subgoals = 1;
  }
  r.total_actions = static_cast<int>(r.actions.size());
  r.wall_time = since(start);
  return r;
}

bool replay_solves(const grid::LevelSpec& level, const std::vector<grid::Action>& actions, int gems_needed) {
  grid::GameState s = grid::initial_state(level, gems_needed);
  for (grid::Action a : actions) {
    if (s.exited) return false;
    s = grid::apply_action(s, a);
  }
  return s.exited;
}

double action_coefficient(const std::vector<double>& model_lengths, const std::vector<double>& rm_lengths) {
  if (model_lengths.size() != rm_lengths.size()) throw std::invalid_argument("level sets differ");
  if (model_lengths.empty()) throw std::invalid_argument("no levels");
  double log_sum = 0;
  for (std::size_t i = 0; i < model_lengths.size(); ++i) {
    if (!(model_lengths[i] > 0) || !(rm_lengths[i] > 0)) throw std::invalid_argument("lengths must be positive");
    log_sum += std::log(model_lengths[i] / rm_lengths[i]);
  }
  return std::exp(log_sum / static_cast<double>(model_lengths.size()));
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0, 0};
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0};
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

Report emit_report(const std::vector<EpisodeResult>& results, bool include_timing) {
  Report report;
  // Models and levels in first-appearance order.
  std::vector<std::string> models, levels;
  std::map<std::pair<std::string, std::string>, std::vector<const EpisodeResult*>> by_cell;
  for (const EpisodeResult& r : results) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) levels.push_back(r.level);
    by_cell[{r.model, r.level}].push_back(&r);
  }

  std::ostringstream rows;
  rows << (include_timing ? "model,level,solved,length,time_s,errors,seed\n" : "model,level,solved,length,errors,seed\n");
  for (const EpisodeResult& r : results) {
    rows << r.model << ',' << r.level << ',' << (r.solved ? 1 : 0) << ',' << r.total_actions << ',';
    if (include_timing) rows << fixed(r.goal_selection_time + r.planning_time, 6) << ',';
    rows << r.goal_selection_errors << ',' << r.seed << '\n';
  }
  report.rows = rows.str();

  std::map<std::pair<std::string, std::string>, CellStats> stats;
  for (const auto& [key, eps] : by_cell) {
    CellStats c;
    c.model = key.first;
    c.level = key.second;
    c.reps = static_cast<int>(eps.size());
    std::vector<double> lengths, times;
    double errors = 0;
    for (const EpisodeResult* r : eps) {
      errors += r->goal_selection_errors;
      if (!r->solved) continue;
      ++c.solved;
      lengths.push_back(r->total_actions);
      times.push_back(r->goal_selection_time + r->planning_time);
    }
    std::tie(c.length_mean, c.length_std) = mean_std(lengths);
    std::tie(c.time_mean, c.time_std) = mean_std(times);
    c.errors_mean = errors / c.reps;
    stats[key] = c;
    report.cells.push_back(c);
  }

  for (const std::string& m : models) {
    if (m == "rm") continue;
    std::vector<double> mine, rm;
    for (const std::string& l : levels) {
      auto a = stats.find({m, l});
      auto b = stats.find({"rm", l});
      if (a == stats.end() || b == stats.end() || a->second.solved == 0 || b->second.solved == 0) continue;
      mine.push_back(a->second.length_mean);
      rm.push_back(b->second.length_mean);
    }
    if (!mine.empty()) report.coefficients.emplace_back(m, action_coefficient(mine, rm));
  }

  std::ostringstream table;
  table << std::left << std::setw(14) << "level";
  for (const std::string& m : models) table << " | " << std::setw(include_timing ? 30 : 16) << m;
  table << '\n';
  for (const std::string& l : levels) {
    table << std::left << std::setw(14) << l;
    for (const std::string& m : models) {
      std::string cell = "-";
      auto it = stats.find({m, l});
      if (it != stats.end() && it->second.solved > 0) {
        const CellStats& c = it->second;
        cell = fixed(c.length_mean, 1) + " +- " + fixed(c.length_std, 1);
        if (include_timing) cell += " (" + fixed(c.time_mean, 3) + "s)";
        if (c.solved < c.reps) cell += " " + std::to_string(c.solved) + "/" + std::to_string(c.reps);
      } else if (it == stats.end()) {
        cell = "";
      }
      table << " | " << std::setw(include_timing ? 30 : 16) << cell;
    }
    table << '\n';
  }
  table << "\naction coefficient (geometric mean of length / rm length):\n";
  for (const auto& [m, v] : report.coefficients) table << "  " << m << ": " << fixed(v, 4) << '\n';
  if (report.coefficients.empty()) table << "  -\n";
  report.table = table.str();
  return report;
}

}  // namespace dqp::eval
