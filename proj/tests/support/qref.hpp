#pragma once

// Independent scalar reference for the subgoal Q-target, shared by the unit
// tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/learn/encode.hpp"
#include "dqp/learn/qlearn.hpp"
#include "dqp/rng.hpp"

namespace dqp::testing {

using grid::Cell;
using grid::GameState;
using grid::Subgoal;
using grid::SubgoalKind;
using learn::encode_pair;
using learn::kInputSize;
using learn::TransitionG;

// Random walk of legal moves; returns every visited state.
inline std::vector<GameState> walk(GameState s, int steps, std::mt19937_64& rng) {
  std::vector<GameState> out{s};
  for (int i = 0; i < steps && !s.exited; ++i) {
    s = grid::apply_action(s, grid::kAllActions[uniform_below(rng, 5)]);
    out.push_back(s);
  }
  return out;
}

inline GameState random_level_state(std::mt19937_64& rng) {
  const int w = 5 + static_cast<int>(uniform_below(rng, 6));
  const int h = 5 + static_cast<int>(uniform_below(rng, 4));
  grid::LevelSpec level{w, h, std::vector<grid::Tile>(static_cast<std::size_t>(w * h), grid::Tile::kWall)};
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double u = uniform01(rng);
      level.at({x, y}) = u < 0.25 ? grid::Tile::kGem : u < 0.4 ? grid::Tile::kBoulder : u < 0.7 ? grid::Tile::kDirt : grid::Tile::kEmpty;
    }
  }
  level.at({1, 1}) = grid::Tile::kPlayer;
  level.at({w - 2, h - 2}) = grid::Tile::kExit;
  GameState s = grid::initial_state(level, 2);
  return walk(s, static_cast<int>(uniform_below(rng, 12)), rng).back();
}

// Reference Q-value of one (state, subgoal) pair through the dense input path.
inline double reference_q(const nn::Network& net, const GameState& s, const Subgoal& g) {
  const nn::Tensor t = encode_pair(s, g);
  nn::Matrix x(1, kInputSize);
  for (int i = 0; i < kInputSize; ++i) x(0, i) = t.values[static_cast<std::size_t>(i)];
  return net.infer(x)(0, 0);
}

inline double reference_target(const TransitionG& t, const nn::Network& online, const nn::Network& target, double gamma,
                        bool double_q) {
  if (!t.next) return t.r;
  std::vector<Subgoal> goals;
  for (Cell c : t.next->gem_cells()) goals.push_back({SubgoalKind::kGem, c});
  goals.push_back({SubgoalKind::kExit, t.next->exit});
  double best_online = INFINITY, chosen = 0, min_target = INFINITY;
  for (const Subgoal& g : goals) {
    const double qo = reference_q(online, *t.next, g);
    const double qt = reference_q(target, *t.next, g);
    if (qo < best_online) {
      best_online = qo;
      chosen = qt;
    }
    min_target = std::min(min_target, qt);
  }
  return t.r + gamma * (double_q ? chosen : min_target);
}

}  // namespace dqp::testing
