#include "dqp/learn/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dqp::learn {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "dqp-dataset";
constexpr int kVersion = 1;

json state_json(const grid::GameState& s) {
  json rows = json::array();
  std::istringstream text(render_state(s));
  for (std::string line; std::getline(text, line);) rows.push_back(line);
  return {{"rows", rows},
          {"exit", {s.exit.x, s.exit.y}},
          {"orientation", std::string(grid::orientation_name(s.orientation))},
          {"gems_collected", s.gems_collected},
          {"gems_needed", s.gems_needed},
          {"exited", s.exited}};
}

grid::GameState state_of(const json& j) {
  grid::GameState s;
  const auto rows = j.at("rows").get<std::vector<std::string>>();
  if (rows.empty()) throw std::runtime_error("state without rows");
  s.height = static_cast<int>(rows.size());
  s.width = static_cast<int>(rows[0].size());
  s.terrain.assign(static_cast<std::size_t>(s.width * s.height), grid::Terrain::kEmpty);
  bool player = false;
  for (int y = 0; y < s.height; ++y) {
    const std::string& row = rows[static_cast<std::size_t>(y)];
    if (static_cast<int>(row.size()) != s.width) throw std::runtime_error("ragged state rows");
    for (int x = 0; x < s.width; ++x) {
      const grid::Cell c{x, y};
      switch (grid::tile_from_char(row[static_cast<std::size_t>(x)])) {
        case grid::Tile::kWall: s.at(c) = grid::Terrain::kWall; break;
        case grid::Tile::kBoulder: s.at(c) = grid::Terrain::kBoulder; break;
        case grid::Tile::kGem: s.at(c) = grid::Terrain::kGem; break;
        case grid::Tile::kDirt: s.at(c) = grid::Terrain::kDirt; break;
        case grid::Tile::kPlayer:
          if (player) throw std::runtime_error("state with two players");
          player = true;
          s.player = c;
          break;
        case grid::Tile::kExit:
        case grid::Tile::kEmpty: break;
      }
    }
  }
  if (!player) throw std::runtime_error("state without a player");
  const auto exit = j.at("exit").get<std::vector<int>>();
  if (exit.size() != 2) throw std::runtime_error("exit must be [x, y]");
  s.exit = {exit[0], exit[1]};
  s.orientation = grid::orientation_from_name(j.at("orientation").get<std::string>());
  s.gems_collected = j.at("gems_collected").get<int>();
  s.gems_needed = j.at("gems_needed").get<int>();
  s.exited = j.at("exited").get<bool>();
  return s;
}

json subgoal_json(const grid::Subgoal& g) {
  return {{"kind", g.kind == grid::SubgoalKind::kGem ? "GEM" : "EXIT"}, {"x", g.target.x}, {"y", g.target.y}};
}

grid::Subgoal subgoal_of(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "GEM" && kind != "EXIT") throw std::runtime_error("unknown subgoal kind " + kind);
  return {kind == "GEM" ? grid::SubgoalKind::kGem : grid::SubgoalKind::kExit, {j.at("x").get<int>(), j.at("y").get<int>()}};
}

json next_json(const std::optional<grid::GameState>& s) { return s ? state_json(*s) : json(nullptr); }

std::optional<grid::GameState> next_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  return state_of(j);
}

}  // namespace

std::string state_text(const grid::GameState& s) { return state_json(s).dump(); }

grid::GameState state_from_text(const std::string& text) { return state_of(json::parse(text)); }

void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  json meta = json::array();
  for (const DatasetMeta& m : d.meta) {
    meta.push_back({{"level", m.level},
                    {"level_name", m.level_name},
                    {"samples", m.samples},
                    {"seed", m.seed},
                    {"planner_timeouts", m.planner_timeouts}});
  }
  const bool subgoal = d.mode == DatasetMode::kSubgoal;
  json header = {{"format", kFormat},
                 {"version", kVersion},
                 {"mode", subgoal ? "dqp" : "dql"},
                 {"count", subgoal ? d.subgoal.size() : d.action.size()},
                 {"levels", meta}};
  out << header.dump() << '\n';
  if (subgoal) {
    for (const TransitionG& t : d.subgoal) {
      json r = {{"level", t.level}, {"s", state_json(t.s)}, {"g", subgoal_json(t.g)}, {"r", t.r}, {"next", next_json(t.next)}};
      out << r.dump() << '\n';
    }
  } else {
    for (const TransitionA& t : d.action) {
      json r = {{"level", t.level},
                {"s", state_json(t.s)},
                {"a", std::string(grid::action_name(t.a))},
                {"r", t.r},
                {"next", next_json(t.next)}};
      out << r.dump() << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty dataset file");
  Dataset d;
  std::size_t count = 0;
  try {
    const json header = json::parse(line);
    if (header.at("format").get<std::string>() != kFormat || header.at("version").get<int>() != kVersion) {
      throw std::runtime_error("unsupported dataset format");
    }
    const std::string mode = header.at("mode").get<std::string>();
    if (mode != "dqp" && mode != "dql") throw std::runtime_error("unknown dataset mode " + mode);
    d.mode = mode == "dqp" ? DatasetMode::kSubgoal : DatasetMode::kAction;
    count = header.at("count").get<std::size_t>();
    for (const json& m : header.at("levels")) {
      d.meta.push_back({m.at("level").get<int>(), m.at("level_name").get<std::string>(),
                        m.at("samples").get<std::size_t>(), m.at("seed").get<std::uint64_t>(),
                        m.at("planner_timeouts").get<std::size_t>()});
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json r = json::parse(line);
      if (d.mode == DatasetMode::kSubgoal) {
        d.subgoal.push_back({state_of(r.at("s")), subgoal_of(r.at("g")), r.at("r").get<double>(),
                             next_of(r.at("next")), r.at("level").get<int>()});
      } else {
        d.action.push_back({state_of(r.at("s")), grid::action_from_name(r.at("a").get<std::string>()),
                            r.at("r").get<double>(), next_of(r.at("next")), r.at("level").get<int>()});
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": malformed dataset: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": malformed dataset: " + e.what());
  }
  const std::size_t got = d.mode == DatasetMode::kSubgoal ? d.subgoal.size() : d.action.size();
  if (got != count) throw std::runtime_error(path + ": header announces " + std::to_string(count) + " samples, found " + std::to_string(got));
  return d;
}

}  // namespace dqp::learn
