#include <algorithm>
#include <cstdlib>
#include <queue>
#include <unordered_map>

#include "dqp/planner.hpp"

namespace dqp::planner {

namespace {

using grid::Action;
using grid::Cell;
using grid::Orientation;
using grid::Terrain;

struct Key {
  int cell = 0;
  int orientation = 0;
  std::vector<uint64_t> broken;

  friend bool operator==(const Key&, const Key&) = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    uint64_t h = static_cast<uint64_t>(k.cell) * 4 + static_cast<uint64_t>(k.orientation);
    for (uint64_t w : k.broken) h = h * 0x9E3779B97F4A7C15ULL ^ (w + (h >> 17));
    return static_cast<std::size_t>(h);
  }
};

struct NodeInfo {
  int parent;
  Action action;
  int g;
};

}  // namespace

NativeOutcome native_solve(const grid::GameState& s, const grid::Subgoal& goal, const NativeOptions& options) {
  NativeOutcome out;
  const bool exit_goal = goal.kind == grid::SubgoalKind::kExit;
  if (exit_goal) {
    if (s.exited) {
      out.status = Status::kSolved;
      return out;
    }
    if (!s.has_enough_gems() && !options.ignore_gate) return out;
    if (s.player == s.exit) {
      out.status = Status::kSolved;
      return out;
    }
  } else if (!s.contains(goal.target) || s.at(goal.target) != Terrain::kGem) {
    return out;
  }

  const auto boulders = s.boulder_cells();
  std::vector<int> boulder_index(s.terrain.size(), -1);
  for (std::size_t i = 0; i < boulders.size(); ++i) {
    boulder_index[static_cast<std::size_t>(boulders[i].y * s.width + boulders[i].x)] = static_cast<int>(i);
  }
  const std::size_t words = std::max<std::size_t>(1, (boulders.size() + 63) / 64);
  // Walking onto the exit ends the level once enough gems are held.
  const bool exit_blocks = !exit_goal && s.has_enough_gems();

  auto blocked = [&](Cell c, const std::vector<uint64_t>& broken) {
    if (!s.contains(c)) return true;
    const Terrain t = s.at(c);
    if (t == Terrain::kWall) return true;
    if (t == Terrain::kBoulder) {
      const int b = boulder_index[static_cast<std::size_t>(c.y * s.width + c.x)];
      return ((broken[static_cast<std::size_t>(b) / 64] >> (b % 64)) & 1U) == 0;
    }
    if (t == Terrain::kGem) return !(c == goal.target && !exit_goal);
    if (exit_blocks && c == s.exit) return true;
    return false;
  };
  // USE clears any boulder in front of the player, so boulders never cut a
  // route. A flood fill that walks through them decides reachability exactly
  // and spares the search from enumerating boulder subsets on dead ends.
  {
    std::vector<char> seen(s.terrain.size(), 0);
    std::vector<Cell> stack{s.player};
    seen[static_cast<std::size_t>(s.player.y * s.width + s.player.x)] = 1;
    const std::vector<uint64_t> all_broken(words, ~uint64_t{0});
    bool reached = false;
    while (!stack.empty() && !reached) {
      const Cell c = stack.back();
      stack.pop_back();
      for (Orientation o : {Orientation::kNorth, Orientation::kSouth, Orientation::kWest, Orientation::kEast}) {
        const Cell n = grid::step(c, o);
        if (blocked(n, all_broken)) continue;
        auto& flag = seen[static_cast<std::size_t>(n.y * s.width + n.x)];
        if (flag) continue;
        flag = 1;
        if (n == goal.target) reached = true;
        stack.push_back(n);
      }
    }
    if (!reached) return out;
  }

  auto manhattan = [&](int cell) {
    const int x = cell % s.width;
    const int y = cell / s.width;
    return std::abs(x - goal.target.x) + std::abs(y - goal.target.y);
  };

  std::vector<Key> keys;
  std::vector<NodeInfo> info;
  std::unordered_map<Key, int, KeyHash> index;
  struct Entry {
    int f;
    int g;
    std::uint64_t seq;
    int node;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.seq > b.seq;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);
  std::uint64_t seq = 0;

  Key root{s.player.y * s.width + s.player.x, static_cast<int>(s.orientation), std::vector<uint64_t>(words, 0)};
  index[root] = 0;
  keys.push_back(root);
  info.push_back({-1, Action::kUse, 0});
  open.push({manhattan(root.cell), 0, seq++, 0});

  const Orientation dirs[] = {Orientation::kNorth, Orientation::kSouth, Orientation::kWest, Orientation::kEast};
  const Action moves[] = {Action::kUp, Action::kDown, Action::kLeft, Action::kRight};

  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (e.g != info[static_cast<std::size_t>(e.node)].g) continue;
    const Key k = keys[static_cast<std::size_t>(e.node)];
    const Cell here{k.cell % s.width, k.cell / s.width};
    if (here == goal.target) {
      out.status = Status::kSolved;
      for (int n = e.node; info[static_cast<std::size_t>(n)].parent >= 0; n = info[static_cast<std::size_t>(n)].parent) {
        out.actions.push_back(info[static_cast<std::size_t>(n)].action);
      }
      std::reverse(out.actions.begin(), out.actions.end());
      return out;
    }
    ++out.expanded;
    auto push = [&](Key next, Action a) {
      const int g = e.g + 1;
      auto it = index.find(next);
      int id;
      if (it == index.end()) {
        id = static_cast<int>(keys.size());
        index.emplace(next, id);
        keys.push_back(std::move(next));
        info.push_back({e.node, a, g});
      } else {
        id = it->second;
        if (g >= info[static_cast<std::size_t>(id)].g) return;
        info[static_cast<std::size_t>(id)] = {e.node, a, g};
      }
      open.push({g + manhattan(keys[static_cast<std::size_t>(id)].cell), g, seq++, id});
    };
    for (int d = 0; d < 4; ++d) {
      if (k.orientation != static_cast<int>(dirs[d])) {
        Key next = k;
        next.orientation = static_cast<int>(dirs[d]);
        push(std::move(next), moves[d]);
        continue;
      }
      const Cell target = grid::step(here, dirs[d]);
      if (blocked(target, k.broken)) continue;
      Key next = k;
      next.cell = target.y * s.width + target.x;
      push(std::move(next), moves[d]);
    }
    const Cell facing = grid::step(here, static_cast<Orientation>(k.orientation));
    if (s.contains(facing) && s.at(facing) == Terrain::kBoulder) {
      const int b = boulder_index[static_cast<std::size_t>(facing.y * s.width + facing.x)];
      if (((k.broken[static_cast<std::size_t>(b) / 64] >> (b % 64)) & 1U) == 0) {
        Key next = k;
        next.broken[static_cast<std::size_t>(b) / 64] |= uint64_t{1} << (b % 64);
        push(std::move(next), Action::kUse);
      }
    }
  }
  return out;
}

}  // namespace dqp::planner
