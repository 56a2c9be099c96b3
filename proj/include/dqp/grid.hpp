#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dqp::grid {

inline constexpr int kMaxSide = 30;
inline constexpr int kDefaultGemsNeeded = 9;

struct Cell {
  int x = 0;  // column
  int y = 0;  // row

  friend bool operator==(const Cell&, const Cell&) = default;
  // Row-major order: (row, column).
  friend std::strong_ordering operator<=>(const Cell& a, const Cell& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

enum class Tile : std::uint8_t { kWall, kBoulder, kGem, kPlayer, kExit, kDirt, kEmpty };

char tile_char(Tile t);
Tile tile_from_char(char c);  // throws LevelError for unknown characters

class LevelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LevelSpec {
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;  // row-major, size width * height

  Tile at(Cell c) const { return tiles[static_cast<std::size_t>(c.y * width + c.x)]; }
  Tile& at(Cell c) { return tiles[static_cast<std::size_t>(c.y * width + c.x)]; }
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  int count(Tile t) const;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

// Parses GVGAI level description text. Rows are newline separated; a single
// trailing newline is accepted. Throws LevelError on any violation.
LevelSpec parse_level(std::string_view text);
// Always ends with a newline, never has trailing whitespace.
std::string render_level(const LevelSpec& level);
// Checks the LevelSpec invariants, throwing LevelError.
void validate_level(const LevelSpec& level);

LevelSpec load_level_file(const std::string& path);
void save_level_file(const std::string& path, const LevelSpec& level);

enum class Orientation : std::uint8_t { kNorth, kSouth, kEast, kWest };
enum class Action : std::uint8_t { kUp, kDown, kLeft, kRight, kUse };

inline constexpr Action kAllActions[] = {Action::kUp, Action::kDown, Action::kLeft,
                                         Action::kRight, Action::kUse};
inline constexpr Orientation kDefaultOrientation = Orientation::kSouth;

std::string_view orientation_name(Orientation o);
Orientation orientation_from_name(std::string_view name);
std::string_view action_name(Action a);
Action action_from_name(std::string_view name);

// Terrain layer of a game state. The player and the exit are tracked
// separately, so their cells are kEmpty here.
enum class Terrain : std::uint8_t { kEmpty, kDirt, kWall, kBoulder, kGem };

// Complete deterministic snapshot of a Boulder Dash level. The terrain grid
// makes gem, boulder, dirt and wall sets disjoint by construction.
struct GameState {
  int width = 0;
  int height = 0;
  std::vector<Terrain> terrain;
  Cell player;
  Orientation orientation = kDefaultOrientation;
  Cell exit;
  int gems_collected = 0;
  int gems_needed = kDefaultGemsNeeded;
  bool exited = false;

  Terrain at(Cell c) const { return terrain[static_cast<std::size_t>(c.y * width + c.x)]; }
  Terrain& at(Cell c) { return terrain[static_cast<std::size_t>(c.y * width + c.x)]; }
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }

  std::vector<Cell> cells_with(Terrain t) const;  // row-major order
  std::vector<Cell> gem_cells() const { return cells_with(Terrain::kGem); }
  std::vector<Cell> boulder_cells() const { return cells_with(Terrain::kBoulder); }
  std::vector<Cell> dirt_cells() const { return cells_with(Terrain::kDirt); }
  std::vector<Cell> wall_cells() const { return cells_with(Terrain::kWall); }
  int gems_remaining() const;
  bool has_enough_gems() const { return gems_collected >= gems_needed; }

  friend bool operator==(const GameState&, const GameState&) = default;
};

std::size_t hash_value(const GameState& s);

GameState initial_state(const LevelSpec& level, int gems_needed = kDefaultGemsNeeded);

// Level text of the state. The player hides the exit when standing on it.
std::string render_state(const GameState& s);

// Deterministic transition function. Precondition: !s.exited.
GameState apply_action(const GameState& s, Action a);

Orientation facing_for(Action move);
Cell step(Cell c, Orientation o);

enum class SubgoalKind : std::uint8_t { kGem, kExit };

struct Subgoal {
  SubgoalKind kind = SubgoalKind::kGem;
  Cell target;

  friend bool operator==(const Subgoal&, const Subgoal&) = default;
};

// Gems first in row-major order of their cell, EXIT last.
bool subgoal_before(const Subgoal& a, const Subgoal& b);
std::string to_string(const Subgoal& g);

struct CompoundSubgoal {
  std::vector<Subgoal> subgoals;
};

CompoundSubgoal formulate_goals(const GameState& s);

// True once the state satisfies the subgoal (gem gone / level finished).
bool subgoal_achieved(const GameState& before, const Subgoal& g, const GameState& after);

// Number of ordered ways to pick gems_needed of gems_total gems:
// C(total, needed) * needed!. Throws std::overflow_error rather than wrapping.
std::uint64_t trajectory_count(int gems_total, int gems_needed);

}  // namespace dqp::grid

template <>
struct std::hash<dqp::grid::GameState> {
  std::size_t operator()(const dqp::grid::GameState& s) const noexcept {
    return dqp::grid::hash_value(s);
  }
};
