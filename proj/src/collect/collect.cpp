#include "dqp/collect/collect.hpp"

#include <deque>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "dqp/rng.hpp"

namespace dqp::collect {

using grid::GameState;
using grid::Subgoal;
using learn::TransitionA;
using learn::TransitionG;

void GenConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("generator config: ") + what);
  };
  require(width >= 3 && height >= 3 && width <= grid::kMaxSide && height <= grid::kMaxSide,
          "width and height must lie in [3, 30]");
  require(gem_count >= 0 && gem_count + 2 <= (width - 2) * (height - 2), "gems, player and exit must fit inside");
  require(boulder_density >= 0 && dirt_density >= 0 && boulder_density + dirt_density <= 1,
          "densities must be nonnegative and sum to at most 1");
  require(gems_needed >= 0 && gems_needed <= gem_count, "gems_needed must lie in [0, gem_count]");
  require(max_attempts >= 1, "max_attempts must be positive");
}

bool level_reachable(const grid::LevelSpec& level, int gems_needed) {
  const GameState s = grid::initial_state(level, gems_needed);
  if (planner::native_solve(s, {grid::SubgoalKind::kExit, s.exit}, {true}).status != planner::Status::kSolved) {
    return false;
  }
  GameState full = s;
  full.gems_collected = gems_needed;
  for (grid::Cell c : s.gem_cells()) {
    if (planner::native_solve(s, {grid::SubgoalKind::kGem, c}).status != planner::Status::kSolved) return false;
    if (planner::native_solve(full, {grid::SubgoalKind::kGem, c}).status != planner::Status::kSolved) return false;
  }
  return true;
}

grid::LevelSpec gen_level(const GenConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<grid::Cell> interior;
  for (int y = 1; y < cfg.height - 1; ++y)
    for (int x = 1; x < cfg.width - 1; ++x) interior.push_back({x, y});

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    grid::LevelSpec level{cfg.width, cfg.height,
                          std::vector<grid::Tile>(static_cast<std::size_t>(cfg.width * cfg.height), grid::Tile::kWall)};
    std::vector<grid::Cell> cells = interior;
    for (std::size_t i = cells.size() - 1; i > 0; --i) std::swap(cells[i], cells[uniform_below(rng, i + 1)]);
    std::size_t k = 0;
    level.at(cells[k++]) = grid::Tile::kPlayer;
    level.at(cells[k++]) = grid::Tile::kExit;
    for (int g = 0; g < cfg.gem_count; ++g) level.at(cells[k++]) = grid::Tile::kGem;
    // Fill in row-major order so the draw sequence does not depend on the shuffle.
    for (grid::Cell c : interior) {
      if (level.at(c) != grid::Tile::kWall) continue;
      const double u = uniform01(rng);
      level.at(c) = u < cfg.boulder_density                      ? grid::Tile::kBoulder
                    : u < cfg.boulder_density + cfg.dirt_density ? grid::Tile::kDirt
                                                                 : grid::Tile::kEmpty;
    }
    if (level_reachable(level, cfg.gems_needed)) return level;
  }
  throw GenerationError("no reachable level within " + std::to_string(cfg.max_attempts) + " attempts");
}

namespace {

struct KeyG {
  GameState s;
  Subgoal g;
  friend bool operator==(const KeyG&, const KeyG&) = default;
};

struct KeyA {
  GameState s;
  grid::Action a;
  friend bool operator==(const KeyA&, const KeyA&) = default;
};

struct KeyHash {
  std::size_t operator()(const KeyG& k) const noexcept {
    return grid::hash_value(k.s) * 31 + static_cast<std::size_t>(k.g.target.y * 64 + k.g.target.x) * 2 +
           static_cast<std::size_t>(k.g.kind);
  }
  std::size_t operator()(const KeyA& k) const noexcept {
    return grid::hash_value(k.s) * 7 + static_cast<std::size_t>(k.a);
  }
};

GameState execute(GameState s, const std::vector<grid::Action>& actions, const Subgoal& g) {
  const GameState before = s;
  for (grid::Action a : actions) {
    if (s.exited) throw std::logic_error("plan continues after the level ended");
    s = grid::apply_action(s, a);
  }
  if (!grid::subgoal_achieved(before, g, s)) throw std::logic_error("plan does not reach " + grid::to_string(g));
  return s;
}

planner::SubgoalPlan plan(const GameState& s, const Subgoal& g, const CollectConfig& cfg, CollectStats& stats) {
  ++stats.planner_calls;
  planner::SubgoalPlan p = planner::plan_subgoal(s, g, cfg.planner);
  if (p.status == planner::Status::kTimeout) ++stats.planner_timeouts;
  return p;
}

}  // namespace

std::vector<TransitionG> collect_dqp(const grid::LevelSpec& level, std::size_t n, std::uint64_t seed,
                                     const CollectConfig& cfg, CollectStats* stats_out) {
  CollectStats stats;
  std::mt19937_64 rng(seed);
  const GameState start = grid::initial_state(level, cfg.gems_needed);
  std::vector<TransitionG> out;
  std::unordered_set<KeyG, KeyHash> seen;
  std::vector<TransitionG> pending;
  auto commit = [&](const TransitionG& t) {
    if (out.size() >= n || !seen.insert({t.s, t.g}).second) return false;
    out.push_back(t);
    return true;
  };

  GameState s = start;
  int stale = 0;
  while (out.size() < n && stale < cfg.max_stale) {
    const auto goals = grid::formulate_goals(s).subgoals;
    const Subgoal g = goals[uniform_below(rng, goals.size())];
    const planner::SubgoalPlan p = plan(s, g, cfg, stats);
    ++stale;
    if (p.status == planner::Status::kTimeout) continue;
    if (p.status == planner::Status::kUnsolvable) {
      if (commit({s, g, cfg.penalty, std::nullopt})) stale = 0;
      continue;
    }
    const GameState next = execute(s, p.actions, g);
    const auto length = static_cast<double>(p.actions.size());
    if (next.exited) {
      pending.push_back({s, g, length + cfg.final_reward, std::nullopt});
      for (const TransitionG& t : pending) {
        if (commit(t)) stale = 0;
      }
      pending.clear();
      ++stats.episodes;
      s = start;
    } else {
      pending.push_back({s, g, length, next});
      s = next;
    }
  }
  if (stats_out) *stats_out = stats;
  return out;
}

std::vector<TransitionA> collect_dql(const grid::LevelSpec& level, std::size_t n, std::uint64_t seed,
                                     const CollectConfig& cfg, CollectStats* stats_out) {
  CollectStats stats;
  std::mt19937_64 rng(seed);
  const GameState start = grid::initial_state(level, cfg.gems_needed);
  std::vector<TransitionA> out;
  std::unordered_set<KeyA, KeyHash> seen;
  int stale = 0;
  GameState s = start;
  // Executes one action and records it; false once the level is finished.
  auto act = [&](grid::Action a) {
    const GameState next = grid::apply_action(s, a);
    TransitionA t{s, a, -1.0, next};
    if (next.exited) {
      t.r = 5.0;
      t.next.reset();
    }
    if (out.size() < n && seen.insert({s, a}).second) {
      out.push_back(std::move(t));
      stale = 0;
    } else {
      ++stale;
    }
    s = next;
    return !s.exited;
  };
  auto restart = [&] {
    if (s.exited) ++stats.episodes;
    s = start;
  };

  while (out.size() < n && stale < cfg.max_stale) {
    std::vector<Subgoal> goals;
    for (grid::Cell c : s.gem_cells()) goals.push_back({grid::SubgoalKind::kGem, c});
    if (s.has_enough_gems()) goals.push_back({grid::SubgoalKind::kExit, s.exit});
    if (goals.empty()) {
      restart();
      continue;
    }
    const Subgoal g = goals[uniform_below(rng, goals.size())];
    const planner::SubgoalPlan p = plan(s, g, cfg, stats);
    if (p.status != planner::Status::kSolved) {
      ++stale;
      restart();
      continue;
    }
    bool running = true;
    for (grid::Action a : p.actions) {
      if (!(running = act(a))) break;
    }
    if (running) {
      const auto k = 1 + uniform_below(rng, static_cast<std::uint64_t>(cfg.random_walk_max));
      for (std::uint64_t i = 0; i < k && running; ++i) running = act(grid::kAllActions[uniform_below(rng, 5)]);
    }
    if (!running) restart();
  }
  if (stats_out) *stats_out = stats;
  return out;
}

std::vector<TransitionG> collect_exhaustive(const grid::LevelSpec& level, const CollectConfig& cfg,
                                            CollectStats* stats_out) {
  CollectStats stats;
  const GameState start = grid::initial_state(level, cfg.gems_needed);
  std::vector<TransitionG> out;
  std::unordered_set<GameState> visited{start};
  std::deque<GameState> queue{start};
  while (!queue.empty()) {
    const GameState s = queue.front();
    queue.pop_front();
    for (const Subgoal& g : grid::formulate_goals(s).subgoals) {
      const planner::SubgoalPlan p = plan(s, g, cfg, stats);
      if (p.status == planner::Status::kTimeout) continue;
      if (p.status == planner::Status::kUnsolvable) {
        out.push_back({s, g, cfg.penalty, std::nullopt});
        continue;
      }
      const GameState next = execute(s, p.actions, g);
      const auto length = static_cast<double>(p.actions.size());
      if (next.exited) {
        out.push_back({s, g, length + cfg.final_reward, std::nullopt});
        ++stats.episodes;
      } else {
        out.push_back({s, g, length, next});
        if (visited.insert(next).second) queue.push_back(next);
      }
    }
  }
  if (stats_out) *stats_out = stats;
  return out;
}

}  // namespace dqp::collect
