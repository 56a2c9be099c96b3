#include "dqp/pddl/boulder_dash.hpp"

#include <algorithm>
#include <stdexcept>

#include "dqp/pddl/parser.hpp"

namespace dqp::pddl::bd {

namespace {

struct Dir {
  const char* name;
  grid::Orientation orientation;
  grid::Action action;
};

constexpr Dir kDirs[] = {
    {"up", grid::Orientation::kNorth, grid::Action::kUp},
    {"down", grid::Orientation::kSouth, grid::Action::kDown},
    {"right", grid::Orientation::kEast, grid::Action::kRight},
    {"left", grid::Orientation::kWest, grid::Action::kLeft},
};

std::string build_domain_text() {
  std::string t = R"((define (domain boulder-dash)
  (:requirements :typing :negative-preconditions :existential-preconditions :conditional-effects)
  (:types Locatable Cell Num - object
          Player Gem Boulder Exit - Locatable)
  (:predicates
    (at ?l - Locatable ?c - Cell)
    (connected-up ?c1 ?c2 - Cell)
    (connected-down ?c1 ?c2 - Cell)
    (connected-left ?c1 ?c2 - Cell)
    (connected-right ?c1 ?c2 - Cell)
    (oriented-up ?p - Player)
    (oriented-down ?p - Player)
    (oriented-left ?p - Player)
    (oriented-right ?p - Player)
    (terrain-empty ?c - Cell)
    (terrain-wall ?c - Cell)
    (got ?g - Gem)
    (exited ?p - Player)
    (gem-count ?n - Num)
    (next-count ?n1 ?n2 - Num)
    (enough-gems ?n - Num)
    (got-nine-gems)
  )
)";
  for (const Dir& d : kDirs) {
    const std::string n = d.name;
    std::string others;
    for (const Dir& o : kDirs) {
      if (std::string(o.name) != n) others += "\n      (not (oriented-" + std::string(o.name) + " ?p))";
    }
    t += R"(
  (:action turn-)" + n + R"(
    :parameters (?p - Player)
    :precondition (and
      (not (oriented-)" + n + R"( ?p))
      (not (exited ?p)))
    :effect (and
      (oriented-)" + n + " ?p)" + others + R"()
  )

  (:action move-)" + n + R"(
    :parameters (?p - Player ?c1 ?c2 - Cell)
    :precondition (and
      (at ?p ?c1)
      (oriented-)" + n + R"( ?p)
      (connected-)" + n + R"( ?c1 ?c2)
      (not (exists (?b - Boulder) (at ?b ?c2)))
      (not (exists (?g - Gem) (at ?g ?c2)))
      (not (terrain-wall ?c2))
      (not (exited ?p)))
    :effect (and
      (when (not (terrain-empty ?c2)) (terrain-empty ?c2))
      (when (and (got-nine-gems) (exists (?e - Exit) (at ?e ?c2))) (exited ?p))
      (not (at ?p ?c1))
      (at ?p ?c2))
  )

  (:action get-gem-)" + n + R"(
    :parameters (?p - Player ?c1 ?c2 - Cell ?g - Gem ?n1 ?n2 - Num)
    :precondition (and
      (at ?p ?c1)
      (oriented-)" + n + R"( ?p)
      (connected-)" + n + R"( ?c1 ?c2)
      (at ?g ?c2)
      (gem-count ?n1)
      (next-count ?n1 ?n2)
      (not (exited ?p)))
    :effect (and
      (not (at ?g ?c2))
      (got ?g)
      (not (gem-count ?n1))
      (gem-count ?n2)
      (when (enough-gems ?n2) (got-nine-gems))
      (not (at ?p ?c1))
      (at ?p ?c2))
  )

  (:action use-)" + n + R"(
    :parameters (?p - Player ?c1 ?c2 - Cell ?b - Boulder)
    :precondition (and
      (at ?p ?c1)
      (oriented-)" + n + R"( ?p)
      (connected-)" + n + R"( ?c1 ?c2)
      (at ?b ?c2)
      (not (exited ?p)))
    :effect (not (at ?b ?c2))
  )
)";
  }
  t += ")\n";
  return t;
}

const char* orientation_suffix(grid::Orientation o) {
  for (const Dir& d : kDirs) {
    if (d.orientation == o) return d.name;
  }
  return "down";
}

std::string num(int k) { return "n" + std::to_string(k); }

bool interior(const grid::GameState& s, grid::Cell c) {
  return c.x > 0 && c.y > 0 && c.x < s.width - 1 && c.y < s.height - 1;
}

// `horizon`: counter steps n_k -> n_{k+1} exist for collected <= k < horizon.
ProblemDef build(const grid::GameState& s, int horizon, std::vector<Literal> goal,
                 const std::string& name) {
  ProblemDef p;
  p.name = name;
  p.domain_name = "boulder-dash";
  const auto gems = s.gem_cells();
  const auto boulders = s.boulder_cells();
  const int total = s.gems_collected + static_cast<int>(gems.size());

  p.objects.push_back({"player1", "player"});
  p.objects.push_back({"exit1", "exit"});
  for (std::size_t i = 0; i < gems.size(); ++i) p.objects.push_back({"gem" + std::to_string(i + 1), "gem"});
  for (std::size_t i = 0; i < boulders.size(); ++i) {
    p.objects.push_back({"boulder" + std::to_string(i + 1), "boulder"});
  }
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) p.objects.push_back({cell_name({x, y}), "cell"});
  }
  for (int k = 0; k <= total; ++k) p.objects.push_back({num(k), "num"});

  auto& init = p.init;
  init.push_back({"at", {"player1", cell_name(s.player)}});
  init.push_back({"at", {"exit1", cell_name(s.exit)}});
  for (std::size_t i = 0; i < gems.size(); ++i) {
    init.push_back({"at", {"gem" + std::to_string(i + 1), cell_name(gems[i])}});
  }
  for (std::size_t i = 0; i < boulders.size(); ++i) {
    init.push_back({"at", {"boulder" + std::to_string(i + 1), cell_name(boulders[i])}});
  }
  init.push_back({std::string("oriented-") + orientation_suffix(s.orientation), {"player1"}});
  init.push_back({"gem-count", {num(s.gems_collected)}});
  for (int k = s.gems_collected; k < std::min(horizon, total); ++k) {
    init.push_back({"next-count", {num(k), num(k + 1)}});
  }
  if (s.gems_needed <= total) init.push_back({"enough-gems", {num(std::max(s.gems_needed, 0))}});
  if (s.has_enough_gems()) init.push_back({"got-nine-gems", {}});
  if (s.exited || (s.player == s.exit && s.has_enough_gems())) init.push_back({"exited", {"player1"}});

  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const grid::Cell c{x, y};
      if (interior(s, c)) {
        for (const Dir& d : kDirs) {
          init.push_back({std::string("connected-") + d.name, {cell_name(c), cell_name(grid::step(c, d.orientation))}});
        }
      }
      switch (s.at(c)) {
        case grid::Terrain::kWall:
          init.push_back({"terrain-wall", {cell_name(c)}});
          break;
        case grid::Terrain::kDirt:
          break;
        default:
          init.push_back({"terrain-empty", {cell_name(c)}});
          break;
      }
    }
  }
  p.goal = std::move(goal);
  return p;
}

}  // namespace

const std::string& domain_text() {
  static const std::string text = build_domain_text();
  return text;
}

const DomainDef& domain() {
  static const DomainDef d = parse_domain(domain_text());
  return d;
}

std::string cell_name(grid::Cell c) {
  return "c_" + std::to_string(c.x) + "_" + std::to_string(c.y);
}

std::string gem_object(const grid::GameState& s, grid::Cell c) {
  const auto gems = s.gem_cells();
  auto it = std::find(gems.begin(), gems.end(), c);
  if (it == gems.end()) {
    throw std::invalid_argument("no gem at " + cell_name(c));
  }
  return "gem" + std::to_string(it - gems.begin() + 1);
}

ProblemDef make_problem(const grid::GameState& s, const grid::Subgoal& goal) {
  if (goal.kind == grid::SubgoalKind::kGem) {
    const std::string gem = gem_object(s, goal.target);
    return build(s, s.gems_collected + 1, {{true, "got", {gem}}},
                 "get-" + gem);
  }
  return build(s, s.gems_collected, {{true, "exited", {"player1"}}}, "reach-exit");
}

std::string emit_problem(const grid::GameState& s, const grid::Subgoal& goal) {
  return render_problem(make_problem(s, goal));
}

ProblemDef make_level_problem(const grid::GameState& s) {
  const int total = s.gems_collected + s.gems_remaining();
  return build(s, total, {{true, "exited", {"player1"}}}, "level");
}

grid::Action game_action(const GroundAction& a) {
  if (a.name.rfind("use-", 0) == 0) return grid::Action::kUse;
  const auto dash = a.name.rfind('-');
  const std::string dir = dash == std::string::npos ? a.name : a.name.substr(dash + 1);
  for (const Dir& d : kDirs) {
    if (dir == d.name) return d.action;
  }
  throw std::invalid_argument("not a boulder-dash action: " + a.name);
}

std::vector<grid::Action> game_actions(const GroundTask& task, const std::vector<int>& plan) {
  std::vector<grid::Action> out;
  out.reserve(plan.size());
  for (int a : plan) out.push_back(game_action(task.actions.at(static_cast<std::size_t>(a))));
  return out;
}

namespace {

grid::Cell parse_cell(const std::string& name) {
  // c_X_Y
  const auto second = name.find('_', 2);
  return {std::stoi(name.substr(2, second - 2)), std::stoi(name.substr(second + 1))};
}

}  // namespace

grid::GameState decode_state(const GroundTask& task, const std::vector<int>& true_atoms,
                             const grid::GameState& origin) {
  grid::GameState s = origin;
  for (auto& t : s.terrain) {
    if (t != grid::Terrain::kWall) t = grid::Terrain::kDirt;
  }
  s.exited = false;
  for (int idx : true_atoms) {
    const GroundAtom& a = task.atoms.at(static_cast<std::size_t>(idx));
    if (a.predicate == "terrain-empty") {
      grid::Terrain& t = s.at(parse_cell(a.args[0]));
      if (t == grid::Terrain::kDirt) t = grid::Terrain::kEmpty;
    }
  }
  for (int idx : true_atoms) {
    const GroundAtom& a = task.atoms.at(static_cast<std::size_t>(idx));
    if (a.predicate == "at") {
      const grid::Cell c = parse_cell(a.args[1]);
      if (a.args[0] == "player1") {
        s.player = c;
      } else if (a.args[0] == "exit1") {
        s.exit = c;
      } else if (a.args[0].rfind("gem", 0) == 0) {
        s.at(c) = grid::Terrain::kGem;
      } else if (a.args[0].rfind("boulder", 0) == 0) {
        s.at(c) = grid::Terrain::kBoulder;
      }
    } else if (a.predicate.rfind("oriented-", 0) == 0) {
      const std::string dir = a.predicate.substr(9);
      for (const Dir& d : kDirs) {
        if (dir == d.name) s.orientation = d.orientation;
      }
    } else if (a.predicate == "gem-count") {
      s.gems_collected = std::stoi(a.args[0].substr(1));
    } else if (a.predicate == "exited") {
      s.exited = true;
    }
  }
  // Cells vacated by a gem or boulder are empty rather than dirt.
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const grid::Cell c{x, y};
      const grid::Terrain before = origin.at(c);
      grid::Terrain& now = s.at(c);
      if (now == grid::Terrain::kDirt &&
          (before == grid::Terrain::kGem || before == grid::Terrain::kBoulder || before == grid::Terrain::kEmpty)) {
        now = grid::Terrain::kEmpty;
      }
    }
  }
  return s;
}

}  // namespace dqp::pddl::bd
