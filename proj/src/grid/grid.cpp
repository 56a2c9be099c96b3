#include "dqp/grid.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dqp::grid {

char tile_char(Tile t) {
  switch (t) {
    case Tile::kWall: return 'w';
    case Tile::kBoulder: return 'o';
    case Tile::kGem: return 'x';
    case Tile::kPlayer: return 'A';
    case Tile::kExit: return 'e';
    case Tile::kDirt: return '.';
    case Tile::kEmpty: return '-';
  }
  return '?';
}

Tile tile_from_char(char c) {
  switch (c) {
    case 'w': return Tile::kWall;
    case 'o': return Tile::kBoulder;
    case 'x': return Tile::kGem;
    case 'A': return Tile::kPlayer;
    case 'e': return Tile::kExit;
    case '.': return Tile::kDirt;
    case '-': return Tile::kEmpty;
    default: break;
  }
  throw LevelError(std::string("unknown character '") + c + "'");
}

int LevelSpec::count(Tile t) const {
  return static_cast<int>(std::count(tiles.begin(), tiles.end(), t));
}

void validate_level(const LevelSpec& level) {
  if (level.width <= 0 || level.height <= 0) throw LevelError("empty level");
  if (level.width > kMaxSide || level.height > kMaxSide) {
    throw LevelError("level larger than " + std::to_string(kMaxSide) + "x" +
                     std::to_string(kMaxSide));
  }
  if (level.tiles.size() != static_cast<std::size_t>(level.width * level.height)) {
    throw LevelError("tile count does not match dimensions");
  }
  const int players = level.count(Tile::kPlayer);
  if (players == 0) throw LevelError("no player");
  if (players > 1) throw LevelError("multiple players");
  const int exits = level.count(Tile::kExit);
  if (exits == 0) throw LevelError("no exit");
  if (exits > 1) throw LevelError("multiple exits");
  for (int y = 0; y < level.height; ++y) {
    for (int x = 0; x < level.width; ++x) {
      const bool border = x == 0 || y == 0 || x == level.width - 1 || y == level.height - 1;
      if (border && level.at({x, y}) != Tile::kWall) {
        throw LevelError("non-wall border cell at (" + std::to_string(x) + "," +
                         std::to_string(y) + ")");
      }
    }
  }
}

LevelSpec parse_level(std::string_view text) {
  std::vector<std::string_view> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view row = text.substr(pos, nl - pos);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    rows.push_back(row);
    pos = nl + 1;
  }
  if (rows.empty()) throw LevelError("empty level");

  LevelSpec level;
  level.height = static_cast<int>(rows.size());
  level.width = static_cast<int>(rows.front().size());
  level.tiles.reserve(static_cast<std::size_t>(level.width * level.height));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != level.width) {
      throw LevelError("ragged rows: row " + std::to_string(r) + " has length " +
                       std::to_string(rows[r].size()) + ", expected " +
                       std::to_string(level.width));
    }
    for (char c : rows[r]) level.tiles.push_back(tile_from_char(c));
  }
  validate_level(level);
  return level;
}

std::string render_level(const LevelSpec& level) {
  std::string out;
  out.reserve(static_cast<std::size_t>((level.width + 1) * level.height));
  for (int y = 0; y < level.height; ++y) {
    for (int x = 0; x < level.width; ++x) out.push_back(tile_char(level.at({x, y})));
    out.push_back('\n');
  }
  return out;
}

LevelSpec load_level_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LevelError("cannot open level file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_level(ss.str());
}

void save_level_file(const std::string& path, const LevelSpec& level) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LevelError("cannot write level file " + path);
  out << render_level(level);
}

std::string_view orientation_name(Orientation o) {
  switch (o) {
    case Orientation::kNorth: return "NORTH";
    case Orientation::kSouth: return "SOUTH";
    case Orientation::kEast: return "EAST";
    case Orientation::kWest: return "WEST";
  }
  return "?";
}

Orientation orientation_from_name(std::string_view name) {
  for (Orientation o : {Orientation::kNorth, Orientation::kSouth, Orientation::kEast,
                        Orientation::kWest}) {
    if (orientation_name(o) == name) return o;
  }
  throw std::invalid_argument("unknown orientation " + std::string(name));
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::kUp: return "UP";
    case Action::kDown: return "DOWN";
    case Action::kLeft: return "LEFT";
    case Action::kRight: return "RIGHT";
    case Action::kUse: return "USE";
  }
  return "?";
}

Action action_from_name(std::string_view name) {
  for (Action a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown action " + std::string(name));
}

std::vector<Cell> GameState::cells_with(Terrain t) const {
  std::vector<Cell> out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (at({x, y}) == t) out.push_back({x, y});
    }
  }
  return out;
}

int GameState::gems_remaining() const {
  return static_cast<int>(std::count(terrain.begin(), terrain.end(), Terrain::kGem));
}

std::size_t hash_value(const GameState& s) {
  // FNV-1a over every field.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  mix(static_cast<std::uint64_t>(s.width));
  mix(static_cast<std::uint64_t>(s.height));
  for (Terrain t : s.terrain) mix(static_cast<std::uint64_t>(t));
  mix(static_cast<std::uint64_t>(s.player.x));
  mix(static_cast<std::uint64_t>(s.player.y));
  mix(static_cast<std::uint64_t>(s.orientation));
  mix(static_cast<std::uint64_t>(s.exit.x));
  mix(static_cast<std::uint64_t>(s.exit.y));
  mix(static_cast<std::uint64_t>(s.gems_collected));
  mix(static_cast<std::uint64_t>(s.gems_needed));
  mix(s.exited ? 1 : 0);
  return static_cast<std::size_t>(h);
}

GameState initial_state(const LevelSpec& level, int gems_needed) {
  GameState s;
  s.width = level.width;
  s.height = level.height;
  s.terrain.assign(level.tiles.size(), Terrain::kEmpty);
  s.gems_needed = gems_needed;
  for (int y = 0; y < level.height; ++y) {
    for (int x = 0; x < level.width; ++x) {
      const Cell c{x, y};
      switch (level.at(c)) {
        case Tile::kWall: s.at(c) = Terrain::kWall; break;
        case Tile::kBoulder: s.at(c) = Terrain::kBoulder; break;
        case Tile::kGem: s.at(c) = Terrain::kGem; break;
        case Tile::kDirt: s.at(c) = Terrain::kDirt; break;
        case Tile::kPlayer: s.player = c; break;
        case Tile::kExit: s.exit = c; break;
        case Tile::kEmpty: break;
      }
    }
  }
  return s;
}

std::string render_state(const GameState& s) {
  std::string out;
  out.reserve(static_cast<std::size_t>((s.width + 1) * s.height));
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const Cell c{x, y};
      char ch = '-';
      if (c == s.player) {
        ch = 'A';
      } else if (c == s.exit) {
        ch = 'e';
      } else {
        switch (s.at(c)) {
          case Terrain::kEmpty: ch = '-'; break;
          case Terrain::kDirt: ch = '.'; break;
          case Terrain::kWall: ch = 'w'; break;
          case Terrain::kBoulder: ch = 'o'; break;
          case Terrain::kGem: ch = 'x'; break;
        }
      }
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

Orientation facing_for(Action move) {
  switch (move) {
    case Action::kUp: return Orientation::kNorth;
    case Action::kDown: return Orientation::kSouth;
    case Action::kLeft: return Orientation::kWest;
    case Action::kRight: return Orientation::kEast;
    case Action::kUse: break;
  }
  throw std::invalid_argument("USE has no facing direction");
}

Cell step(Cell c, Orientation o) {
  switch (o) {
    case Orientation::kNorth: return {c.x, c.y - 1};
    case Orientation::kSouth: return {c.x, c.y + 1};
    case Orientation::kEast: return {c.x + 1, c.y};
    case Orientation::kWest: return {c.x - 1, c.y};
  }
  return c;
}

GameState apply_action(const GameState& s, Action a) {
  if (s.exited) throw std::logic_error("apply_action on a finished level");
  GameState next = s;
  if (a == Action::kUse) {
    const Cell target = step(s.player, s.orientation);
    if (next.contains(target) && next.at(target) == Terrain::kBoulder) {
      next.at(target) = Terrain::kEmpty;
    }
    return next;
  }
  const Orientation dir = facing_for(a);
  if (s.orientation != dir) {
    next.orientation = dir;
    return next;
  }
  const Cell target = step(s.player, dir);
  if (!next.contains(target)) return next;
  Terrain& t = next.at(target);
  if (t == Terrain::kWall || t == Terrain::kBoulder) return next;
  if (t == Terrain::kGem) ++next.gems_collected;
  t = Terrain::kEmpty;
  next.player = target;
  if (target == next.exit && next.has_enough_gems()) next.exited = true;
  return next;
}

bool subgoal_before(const Subgoal& a, const Subgoal& b) {
  if (a.kind != b.kind) return a.kind == SubgoalKind::kGem;
  return a.target < b.target;
}

std::string to_string(const Subgoal& g) {
  std::string s = g.kind == SubgoalKind::kGem ? "GEM" : "EXIT";
  return s + "(" + std::to_string(g.target.x) + "," + std::to_string(g.target.y) + ")";
}

CompoundSubgoal formulate_goals(const GameState& s) {
  CompoundSubgoal goals;
  for (Cell c : s.gem_cells()) goals.subgoals.push_back({SubgoalKind::kGem, c});
  goals.subgoals.push_back({SubgoalKind::kExit, s.exit});
  return goals;
}

bool subgoal_achieved(const GameState& before, const Subgoal& g, const GameState& after) {
  if (g.kind == SubgoalKind::kExit) return after.exited;
  return before.at(g.target) == Terrain::kGem && after.at(g.target) != Terrain::kGem;
}

std::uint64_t trajectory_count(int gems_total, int gems_needed) {
  if (gems_needed < 0 || gems_total < 0 || gems_needed > gems_total) {
    throw std::invalid_argument("trajectory_count requires 0 <= needed <= total");
  }
  // C(n, k) * k! = n * (n - 1) * ... * (n - k + 1)
  std::uint64_t result = 1;
  for (int i = 0; i < gems_needed; ++i) {
    const auto factor = static_cast<std::uint64_t>(gems_total - i);
    if (__builtin_mul_overflow(result, factor, &result)) {
      throw std::overflow_error("trajectory_count overflows 64 bits");
    }
  }
  return result;
}

}  // namespace dqp::grid
