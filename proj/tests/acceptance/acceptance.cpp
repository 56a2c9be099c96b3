// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status 0 iff every hard criterion passes (9 is soft). A
// criterion listed with --known-failure still reports FAIL but does not
// change the exit status. The verdict lines are also written to
// WORK/report.txt.
//
//   acceptance [--work DIR] [--c7-iterations N] [--known-failure ID] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dqp/cli/app.hpp"
#include "dqp/collect/collect.hpp"
#include "dqp/eval/eval.hpp"
#include "dqp/grid.hpp"
#include "dqp/learn/qlearn.hpp"
#include "dqp/pddl/boulder_dash.hpp"
#include "dqp/planner.hpp"
#include "dqp/rng.hpp"
#include "gradcheck.hpp"
#include "qref.hpp"

namespace fs = std::filesystem;
using namespace dqp;
using grid::GameState;
using grid::Subgoal;
using grid::SubgoalKind;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 20240611;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- shared

std::vector<grid::LevelSpec> generated_levels(std::uint64_t base, int first, int count) {
  std::vector<grid::LevelSpec> out;
  for (int i = first; i < first + count; ++i) {
    collect::GenConfig g;
    g.seed = derive_seed(base, static_cast<std::uint64_t>(i));
    out.push_back(collect::gen_level(g));
  }
  return out;
}

// Initial state after up to 20 random actions that do not end the level.
GameState random_state(const grid::LevelSpec& level, std::mt19937_64& rng) {
  GameState s = grid::initial_state(level);
  const int steps = static_cast<int>(uniform_below(rng, 21));
  for (int i = 0; i < steps; ++i) {
    const GameState n = grid::apply_action(s, grid::kAllActions[uniform_below(rng, 5)]);
    if (!n.exited) s = n;
  }
  return s;
}

// ---------------------------------------------------------------- 1

Verdict combinatorics() {
  const std::uint64_t n = grid::trajectory_count(23, 9);
  return {n == 296541907200ULL, "trajectory_count(23, 9) = " + std::to_string(n)};
}

// ---------------------------------------------------------------- 2

struct Task {
  GameState s;
  Subgoal g;
};

Verdict planner_correctness() {
  const auto levels = generated_levels(kSeed + 2, 0, 40);
  std::mt19937_64 rng(derive_seed(kSeed, 2));
  std::vector<Task> tasks;
  for (int k = 0; tasks.size() < 200; ++k) {
    const grid::LevelSpec& level = levels[static_cast<std::size_t>(k) % levels.size()];
    GameState s = random_state(level, rng);
    s.gems_collected = static_cast<int>(uniform_below(rng, 10));
    const auto goals = grid::formulate_goals(s).subgoals;
    const Subgoal g = goals[uniform_below(rng, goals.size())];
    if (planner::native_solve(s, g).status != planner::Status::kSolved) continue;
    tasks.push_back({s, g});
  }

  int valid = 0;
  double worst_time = 0, total_time = 0;
  for (const Task& t : tasks) {
    const auto t0 = Clock::now();
    const auto task = pddl::ground(pddl::bd::domain(), pddl::bd::make_problem(t.s, t.g));
    const auto out = planner::solve(task, {planner::Strategy::kWbfs, 5, 60.0});
    const double dt = seconds_since(t0);
    worst_time = std::max(worst_time, dt);
    total_time += dt;
    if (out.status != planner::Status::kSolved || !planner::validate(task, out.plan)) continue;
    GameState s = t.s;
    for (grid::Action a : pddl::bd::game_actions(task, out.plan.actions)) s = grid::apply_action(s, a);
    if (grid::subgoal_achieved(t.s, t.g, s)) ++valid;
  }
  progress("WBFS: " + std::to_string(valid) + "/200 valid, mean " + fmt("%.3f", total_time / 200) + " s");

  int equal = 0;
  double opt_worst = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    const Task& t = tasks[i * 4];
    const auto native = planner::native_solve(t.s, t.g);
    const auto t0 = Clock::now();
    const auto task = pddl::ground(pddl::bd::domain(), pddl::bd::make_problem(t.s, t.g));
    const auto opt = planner::solve(task, {planner::Strategy::kOpt, 1, 300.0});
    opt_worst = std::max(opt_worst, seconds_since(t0));
    if (opt.status == planner::Status::kSolved && opt.plan.length() == native.actions.size()) ++equal;
  }
  const bool pass = valid == 200 && equal == 50 && total_time / 200 < 1.0;
  return {pass, "WBFS valid " + std::to_string(valid) + "/200 (mean " + fmt("%.3f", total_time / 200) + " s, max " +
                    fmt("%.3f", worst_time) + " s per task); OPT = native optimum on " + std::to_string(equal) +
                    "/50 (max " + fmt("%.2f", opt_worst) + " s)"};
}

// ---------------------------------------------------------------- 3

Verdict exit_unsolvable() {
  const auto levels = generated_levels(kSeed + 2, 0, 20);
  std::mt19937_64 rng(derive_seed(kSeed, 3));
  int unsolvable = 0;
  double worst = 0;
  const int n = 100;
  for (int k = 0; k < n; ++k) {
    GameState s = random_state(levels[static_cast<std::size_t>(k) % levels.size()], rng);
    s.gems_collected = static_cast<int>(uniform_below(rng, 9));
    const auto t0 = Clock::now();
    const auto r = planner::plan_subgoal(s, {SubgoalKind::kExit, s.exit}, {planner::Strategy::kWbfs, 5, 10.0});
    worst = std::max(worst, seconds_since(t0));
    if (r.status == planner::Status::kUnsolvable) ++unsolvable;
  }
  return {unsolvable == n && worst < 0.1, std::to_string(unsolvable) + "/" + std::to_string(n) +
                                              " EXIT tasks below 9 gems Unsolvable, slowest " +
                                              fmt("%.1f", worst * 1000) + " ms (emit + ground + search)"};
}

// ---------------------------------------------------------------- 4

Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  const testing::FdReport r = testing::fd_check(testing::reduced(2), 80, 32);
  const double dt = seconds_since(t0);
  return {r.probed >= 500 && r.worst < 1e-4 && dt < 60,
          std::to_string(r.probed) + " probes (" + std::to_string(r.kinks) + " kink crossings skipped), max relative error " +
              fmt("%.2e", r.worst) + ", " + fmt("%.1f", dt) + " s"};
}

// ---------------------------------------------------------------- 5

Verdict target_branches() {
  std::mt19937_64 rng(derive_seed(kSeed, 5));
  const nn::Network online(learn::subgoal_arch(nn::ArchSpec::desk()), 5);
  const nn::Network target(learn::subgoal_arch(nn::ArchSpec::desk()), 6);
  learn::TrainerConfig cfg;
  cfg.gamma = 0.7;
  int count[3] = {0, 0, 0};
  int matched = 0;
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const GameState s = testing::random_level_state(rng);
    const auto goals = grid::formulate_goals(s).subgoals;
    const Subgoal g = goals[uniform_below(rng, goals.size())];
    const double l = 1 + static_cast<double>(uniform_below(rng, 60));
    cfg.double_q = trial % 2 == 0;
    learn::TransitionG t{s, g, 0, std::nullopt};
    const int branch = static_cast<int>(uniform_below(rng, 3));
    ++count[branch];
    double expected = 0;
    if (branch == 0) {
      t.r = cfg.penalty;
      expected = 200.0;
    } else if (branch == 1) {
      t.r = l + cfg.final_reward;
      expected = l - 200.0;
    } else {
      t.r = l;
      t.next = testing::random_level_state(rng);
      expected = testing::reference_target(t, online, target, 0.7, cfg.double_q);
    }
    const double got = learn::q_target_g(t, online, target, cfg);
    const double err = std::abs(got - expected);
    worst = std::max(worst, err);
    if (err <= 1e-9) ++matched;
  }
  const bool covered = std::min({count[0], count[1], count[2]}) > 250;
  return {matched == 1000 && covered,
          std::to_string(matched) + "/1000 within 1e-9 (unattainable " + std::to_string(count[0]) + ", terminal " +
              std::to_string(count[1]) + ", interior " + std::to_string(count[2]) + "), max |diff| " +
              fmt("%.1e", worst)};
}

// ---------------------------------------------------------------- 6

const char* kOrderingLevel =
    "wwwwwwwwwwwwww\n"
    "wx----A-----xw\n"
    "w-wwwwwwwwww-w\n"
    "w---------x-ew\n"
    "wwwwwwwwwwwwww\n";

// Shortest total over gem orderings, each segment and the final exit
// segment solved optimally; orderings with an unreachable segment are skipped.
int ordering_optimum(const GameState& s0) {
  std::vector<grid::Cell> gems = s0.gem_cells();
  std::vector<std::size_t> order(gems.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  int best = -1;
  do {
    GameState s = s0;
    int total = 0;
    bool ok = true;
    for (std::size_t i : order) {
      const auto r = planner::native_solve(s, {SubgoalKind::kGem, gems[i]});
      if (r.status != planner::Status::kSolved) {
        ok = false;
        break;
      }
      for (grid::Action a : r.actions) s = grid::apply_action(s, a);
      total += static_cast<int>(r.actions.size());
    }
    if (!ok) continue;
    const auto r = planner::native_solve(s, {SubgoalKind::kExit, s.exit});
    if (r.status != planner::Status::kSolved) continue;
    total += static_cast<int>(r.actions.size());
    if (best < 0 || total < best) best = total;
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

Verdict subgoal_ordering() {
  const auto t0 = Clock::now();
  const grid::LevelSpec level = grid::parse_level(kOrderingLevel);
  const GameState s0 = grid::initial_state(level, 3);
  const int optimum = ordering_optimum(s0);
  collect::CollectConfig cc;
  cc.gems_needed = 3;
  const auto data = collect::collect_exhaustive(level, cc);
  progress("ordering optimum " + std::to_string(optimum) + ", exhaustive set " + std::to_string(data.size()) +
           " samples");

  learn::TrainerConfig tc;
  tc.lr = 1e-4;
  tc.iterations = 60000;
  tc.tau = 1000;
  tc.argmin_refresh = 500;
  eval::EpisodeConfig ec;
  ec.gems_needed = 3;
  int good = 0;
  std::string lengths;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = learn::train_g(data, learn::subgoal_arch(nn::ArchSpec::desk()), tc, seed);
    const auto ep = eval::run_dqp_episode(level, r.net, ec);
    if (ep.solved && ep.total_actions <= 1.1 * optimum) ++good;
    lengths += (lengths.empty() ? "" : ", ") + (ep.solved ? std::to_string(ep.total_actions) : std::string("unsolved"));
    progress("seed " + std::to_string(seed) + ": " + std::to_string(ep.total_actions) + " actions");
  }
  const double dt = seconds_since(t0);
  return {optimum > 0 && good >= 4 && dt < 15 * 60,
          "optimum " + std::to_string(optimum) + ", DQP lengths [" + lengths + "], " + std::to_string(good) +
              "/5 within 10%, " + fmt("%.0f", dt) + " s"};
}

// ---------------------------------------------------------------- 7 and 9

struct GeneralizationResult {
  Verdict verdict;
  std::optional<nn::Network> model;  // 50 levels, first seed
};

GeneralizationResult generalization(std::int64_t iterations) {
  const auto t0 = Clock::now();
  const auto train_levels = generated_levels(kSeed + 7, 0, 50);
  const auto test_levels = generated_levels(kSeed + 7, 50, 10);
  progress("collecting 500 samples on each of 50 training levels");
  std::vector<learn::TransitionG> all;
  std::vector<learn::TransitionG> first10;
  for (std::size_t i = 0; i < train_levels.size(); ++i) {
    auto part = collect::collect_dqp(train_levels[i], 500, derive_seed(kSeed + 7, 1000 + i));
    for (auto& t : part) {
      t.level = static_cast<int>(i);
      if (i < 10) first10.push_back(t);
      all.push_back(std::move(t));
    }
  }
  progress(std::to_string(all.size()) + " samples after " + fmt("%.0f", seconds_since(t0)) + " s");

  eval::EpisodeConfig ec;
  ec.planner.timeout_s = 60;
  std::vector<double> rm;
  for (std::size_t i = 0; i < test_levels.size(); ++i) {
    double sum = 0;
    int solved = 0;
    for (int r = 0; r < 10; ++r) {
      const auto ep = eval::run_random_episode(test_levels[i], derive_seed(kSeed + 70, i * 100 + r), ec);
      if (ep.solved) {
        sum += ep.total_actions;
        ++solved;
      }
    }
    rm.push_back(solved ? sum / solved : 0);
  }

  learn::TrainerConfig tc;
  tc.iterations = iterations;
  GeneralizationResult out;
  auto coefficient = [&](const nn::Network& net) {
    std::vector<double> model, base;
    for (std::size_t i = 0; i < test_levels.size(); ++i) {
      const auto ep = eval::run_dqp_episode(test_levels[i], net, ec);
      if (ep.solved && rm[i] > 0) {
        model.push_back(ep.total_actions);
        base.push_back(rm[i]);
      }
    }
    return model.empty() ? INFINITY : eval::action_coefficient(model, base);
  };
  double mean10 = 0, mean50 = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r10 = learn::train_g(first10, learn::subgoal_arch(nn::ArchSpec::desk()), tc, seed);
    const double c10 = coefficient(r10.net);
    progress("seed " + std::to_string(seed) + ", 10 levels: coefficient " + fmt("%.4f", c10));
    auto r50 = learn::train_g(all, learn::subgoal_arch(nn::ArchSpec::desk()), tc, seed);
    const double c50 = coefficient(r50.net);
    progress("seed " + std::to_string(seed) + ", 50 levels: coefficient " + fmt("%.4f", c50));
    if (seed == 0) out.model = std::move(r50.net);
    mean10 += c10 / 3;
    mean50 += c50 / 3;
    per_seed += (per_seed.empty() ? "" : "; ") + fmt("%.3f", c10) + " / " + fmt("%.3f", c50);
  }
  const bool pass = iterations >= 200000 && mean50 < mean10 && mean10 < 0.9 && mean50 < 0.9;
  out.verdict = {pass, "mean coefficient 10 levels " + fmt("%.4f", mean10) + ", 50 levels " + fmt("%.4f", mean50) +
                           " (per seed 10/50: " + per_seed + "), " + std::to_string(iterations) + " iterations, " +
                           fmt("%.0f", seconds_since(t0)) + " s"};
  return out;
}

Verdict timing(std::optional<nn::Network> model) {
  if (!model) {
    progress("no model from the generalization run; training a short one on 3 levels");
    std::vector<learn::TransitionG> data;
    const auto levels = generated_levels(kSeed + 9, 0, 3);
    for (std::size_t i = 0; i < levels.size(); ++i) {
      auto part = collect::collect_dqp(levels[i], 100, derive_seed(kSeed + 9, i));
      data.insert(data.end(), part.begin(), part.end());
    }
    learn::TrainerConfig tc;
    tc.iterations = 5000;
    model = learn::train_g(data, learn::subgoal_arch(nn::ArchSpec::desk()), tc, 0).net;
  }
  const auto levels = generated_levels(kSeed + 7, 50, 10);
  eval::EpisodeConfig ec;
  ec.planner.timeout_s = 60;
  double worst = 0, sum = 0, worst_select = 0;
  for (const auto& level : levels) {
    const auto ep = eval::run_dqp_episode(level, *model, ec);
    const double t = ep.goal_selection_time + ep.planning_time;
    worst = std::max(worst, t);
    worst_select = std::max(worst_select, ep.goal_selection_time);
    sum += t;
  }
  return {worst < 2.0, "goal selection + planning per episode: mean " + fmt("%.3f", sum / levels.size()) +
                           " s, max " + fmt("%.3f", worst) + " s (max goal selection " + fmt("%.3f", worst_select) +
                           " s) on 10 generated 26x13 levels"};
}

// ---------------------------------------------------------------- 8

const char* kConfinedLevel =
    "wwwwwwwwww\n"
    "wA...x...w\n"
    "w.w..ww..w\n"
    "w.x...o.xw\n"
    "w...w...ew\n"
    "wwwwwwwwww\n";
constexpr int kConfinedGems = 3;

Verdict dql_confined(std::int64_t iterations) {
  const auto t0 = Clock::now();
  const grid::LevelSpec level = grid::parse_level(kConfinedLevel);
  collect::CollectConfig cc;
  cc.gems_needed = kConfinedGems;
  collect::CollectStats stats;
  const auto data = collect::collect_dql(level, 30000, derive_seed(kSeed, 8), cc, &stats);
  progress(std::to_string(data.size()) + " action samples after " + fmt("%.0f", seconds_since(t0)) + " s");
  learn::TrainerConfig tc = learn::TrainerConfig::dql();
  tc.iterations = iterations;
  const auto r = learn::train_a(data, learn::action_arch(nn::ArchSpec::desk()), tc, 0);
  int solved = 0;
  std::string lengths;
  for (std::uint64_t run = 0; run < 10; ++run) {
    const auto ep = eval::run_dql_episode(level, r.net, derive_seed(kSeed + 8, run), 2000, kConfinedGems);
    if (ep.solved) ++solved;
    lengths += (lengths.empty() ? "" : ", ") + (ep.solved ? std::to_string(ep.total_actions) : std::string("-"));
  }
  return {data.size() >= 30000 && solved >= 8,
          std::to_string(data.size()) + " samples, " + std::to_string(iterations) + " iterations; solved " +
              std::to_string(solved) + "/10 under 2000 actions [" + lengths + "], " + fmt("%.0f", seconds_since(t0)) +
              " s"};
}

// ---------------------------------------------------------------- 10

int dqp_cli(const std::vector<std::string>& args, std::ostream& log) {
  std::vector<const char*> argv{"dqp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in;
  std::ostringstream out;
  return cli::run(static_cast<int>(argv.size()), argv.data(), in, out, log);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  const char* config = R"({
  "seed": 11,
  "collect": {"dqp_samples": 60},
  "dqp_trainer": {"iterations": 10000},
  "planner": {"timeout_s": 60},
  "eval": {"reps": 3}
})";
  const std::vector<std::vector<std::string>> steps = {
      {"gen-levels", "--config", "config.json", "--count", "3", "--out", "levels"},
      {"collect", "--config", "config.json", "--mode", "dqp", "--levels", "levels", "--out", "data.jsonl"},
      {"train", "--config", "config.json", "--mode", "dqp", "--data", "data.jsonl", "--out", "model.ckpt"},
      {"eval", "--config", "config.json", "--models", "dqp,rm,bfs", "--levels", "levels", "--dqp-model", "model.ckpt",
       "--out", "report", "--no-timing"},
  };
  const fs::path home = fs::current_path();
  std::ostringstream log;
  for (const char* run : {"run_a", "run_b"}) {
    const fs::path dir = work / "determinism" / run;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << config;
    fs::current_path(dir);
    for (const auto& step : steps) {
      const int code = dqp_cli(step, log);
      if (code != 0) {
        fs::current_path(home);
        return {false, std::string(run) + ": dqp " + step[0] + " exited with " + std::to_string(code) + ": " + log.str()};
      }
    }
    fs::current_path(home);
    progress(std::string(run) + " done after " + fmt("%.0f", seconds_since(t0)) + " s");
  }
  const fs::path a = work / "determinism" / "run_a";
  const fs::path b = work / "determinism" / "run_b";
  std::vector<std::string> differing;
  const std::vector<std::string> files = {"levels/manifest.json", "data.jsonl", "data.jsonl.manifest.json", "model.ckpt",
                                          "model.ckpt.log.csv", "report.manifest.json", "report.rows", "report.txt"};
  for (const auto& f : files) {
    if (!fs::exists(a / f) || slurp(a / f) != slurp(b / f)) differing.push_back(f);
  }
  const bool reports_equal = std::find(differing.begin(), differing.end(), "report.txt") == differing.end() &&
                             std::find(differing.begin(), differing.end(), "report.rows") == differing.end();
  std::string detail = reports_equal ? "reports byte-identical" : "reports differ";
  detail += "; " + std::to_string(files.size() - differing.size()) + "/" + std::to_string(files.size()) +
            " artifacts identical";
  for (const auto& f : differing) detail += " (differs: " + f + ")";
  detail += ", " + fmt("%.0f", seconds_since(t0)) + " s";
  return {reports_equal && differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string work = "acceptance_work";
  std::int64_t c7_iterations = 200000;
  std::int64_t c8_iterations = 200000;
  std::vector<int> only;
  std::vector<int> known;
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--c7-iterations", c7_iterations, "Training iterations for criterion 7 (200000 or more to pass)");
  app.add_option("--c8-iterations", c8_iterations, "Training iterations for criterion 8");
  app.add_option("--known-failure", known, "Report this criterion but do not fail the run on it (repeatable)")
      ->check(CLI::Range(1, 10))
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->allow_extra_args(false);
  app.add_option("criteria", only, "Criteria to run (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  const fs::path work_dir = fs::absolute(work);
  std::ofstream summary(work_dir / "report.txt");

  auto selected = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  bool all_pass = true;
  auto report = [&](int id, const char* name, bool soft, const std::function<Verdict()>& run) {
    if (!selected(id)) return;
    std::cerr << "criterion " << id << ": " << name << std::endl;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const bool tolerated = std::find(known.begin(), known.end(), id) != known.end();
    if (!v.pass && !soft && !tolerated) all_pass = false;
    std::ostringstream line;
    line << (v.pass ? "[PASS] " : "[FAIL] ") << id << " " << name << (soft ? " (soft)" : "")
         << (tolerated && !v.pass ? " (known failure)" : "") << ": " << v.detail << "\n";
    std::cout << line.str() << std::flush;
    summary << line.str() << std::flush;
    std::cerr << "  (" << fmt("%.1f", seconds_since(t0)) << " s)" << std::endl;
  };

  report(1, "combinatorics", false, combinatorics);
  report(3, "goal selection errors", false, exit_unsolvable);
  report(4, "gradient fidelity", false, gradient_fidelity);
  report(5, "Q-target branches", false, target_branches);
  report(2, "planner correctness", false, planner_correctness);
  report(10, "determinism audit", false, [&] { return determinism(work_dir); });
  report(6, "subgoal ordering oracle", false, subgoal_ordering);
  report(8, "DQL confined level", false, [&] { return dql_confined(c8_iterations); });
  std::optional<nn::Network> model;
  report(7, "generalization trend", false, [&] {
    auto r = generalization(c7_iterations);
    model = std::move(r.model);
    return r.verdict;
  });
  report(9, "episode timing", true, [&] { return timing(std::move(model)); });
  return all_pass ? 0 : 1;
}
