#include "dqp/cli/app.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "dqp/cli/config.hpp"
#include "dqp/collect/collect.hpp"
#include "dqp/eval/eval.hpp"
#include "dqp/learn/dataset.hpp"
#include "dqp/learn/encode.hpp"
#include "dqp/pddl/boulder_dash.hpp"
#include "dqp/pddl/parser.hpp"
#include "dqp/rng.hpp"

namespace dqp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

class MissingFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingFile("no such file: " + path);
}

enum class Verbosity { kQuiet, kInfo, kDebug };

Verbosity verbosity() {
  const char* v = std::getenv("DQP_LOG");
  if (!v) return Verbosity::kInfo;
  const std::string s(v);
  if (s == "quiet") return Verbosity::kQuiet;
  if (s == "debug") return Verbosity::kDebug;
  return Verbosity::kInfo;
}

// Options shared by every pipeline subcommand.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--seed", seed, "Global seed (overrides the config)")->each([this](const std::string&) {
      seed_given = true;
    });
    app->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1, 256));
  }

  RunConfig config() const {
    RunConfig c;
    if (!config_path.empty()) {
      require_file(config_path);
      c = RunConfig::load(config_path);
    }
    if (seed_given) c.seed = seed;
    return c;
  }
};

// Manifest next to every output: command line, full config, seeds, versions.
// No timestamps or host data, so identical runs give identical manifests.
void write_manifest(const std::string& path, const std::string& command, const std::vector<std::string>& args,
                    const RunConfig& cfg, const json& extra) {
  json m = {{"command", command},
            {"args", args},
            {"config", json::parse(cfg.to_json_text())},
            {"seed", cfg.seed},
            {"versions", {{"dqp", kVersion}, {"dataset_format", 1}, {"checkpoint_format", 1}}}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << m.dump(2) << '\n';
}

std::vector<fs::path> level_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw MissingFile("no such level directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".lvl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw MissingFile("no .lvl files in " + dir);
  return out;
}

// Runs body(i) for i in [0, n) on `jobs` threads. Results must be written
// to per-index slots so that output does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, int jobs, F body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(jobs, static_cast<int>(n)); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string pad3(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep Q-Planning on Boulder Dash: level generation, data collection, training, planning, evaluation"};
  app.require_subcommand(1);
  const Verbosity verb = verbosity();
  auto info = [&](const std::string& msg) {
    if (verb != Verbosity::kQuiet) err << msg << '\n';
  };
  std::vector<std::string> args(argv + 1, argv + argc);

  // gen-levels
  Common gen_common;
  std::size_t gen_count = 10;
  std::size_t gen_first = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-levels", "Generate random solvable levels");
  gen_common.attach(gen);
  gen->add_option("--count", gen_count, "Number of levels")->required();
  gen->add_option("--first-index", gen_first, "Index of the first level (seed stream and file name)");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // collect
  Common col_common;
  std::string col_mode, col_levels, col_out;
  std::size_t col_samples = 0;
  auto* col = app.add_subcommand("collect", "Collect a training dataset from levels");
  col_common.attach(col);
  col->add_option("--mode", col_mode, "dqp or dql")->required()->check(CLI::IsMember({"dqp", "dql"}));
  col->add_option("--levels", col_levels, "Directory of .lvl files")->required();
  col->add_option("--samples-per-level", col_samples, "Unique samples per level (default from config)");
  col->add_option("--out", col_out, "Dataset file")->required();

  // train
  Common tr_common;
  std::string tr_mode, tr_data, tr_out;
  std::int64_t tr_iters = -1;
  auto* tr = app.add_subcommand("train", "Train a Q-network offline");
  tr_common.attach(tr);
  tr->add_option("--mode", tr_mode, "dqp or dql")->required()->check(CLI::IsMember({"dqp", "dql"}));
  tr->add_option("--data", tr_data, "Dataset file")->required();
  tr->add_option("--iters", tr_iters, "Iterations (default from config)");
  tr->add_option("--out", tr_out, "Checkpoint file")->required();

  // plan
  std::string pl_domain, pl_problem, pl_level, pl_subgoal, pl_strategy = "wbfs", pl_write;
  int pl_weight = 5;
  double pl_timeout = 3600;
  int pl_needed = grid::kDefaultGemsNeeded;
  auto* pl = app.add_subcommand("plan", "Solve a PDDL task with the built-in planner");
  pl->add_option("--domain", pl_domain, "PDDL domain file");
  pl->add_option("--problem", pl_problem, "PDDL problem file");
  pl->add_option("--level", pl_level, "Level file (instead of PDDL files)");
  pl->add_option("--subgoal", pl_subgoal, "With --level: exit, level, or X,Y of a gem")->default_str("level");
  pl->add_option("--gems-needed", pl_needed, "With --level: gems required before the exit opens");
  pl->add_option("--write-pddl", pl_write, "With --level: also write domain.pddl and problem.pddl here");
  pl->add_option("--strategy", pl_strategy, "opt, wbfs or ehc")->check(CLI::IsMember({"opt", "wbfs", "ehc"}));
  pl->add_option("--weight", pl_weight, "WBFS weight W in f = g + W*h")->check(CLI::PositiveNumber);
  pl->add_option("--timeout", pl_timeout, "Seconds")->check(CLI::PositiveNumber);

  // eval
  Common ev_common;
  std::string ev_models = "dqp,rm", ev_levels, ev_out, ev_dqp, ev_dql;
  int ev_reps = -1;
  double ev_timeout = -1;
  bool ev_no_timing = false;
  auto* ev = app.add_subcommand("eval", "Evaluate models on levels and write a comparison report");
  ev_common.attach(ev);
  ev->add_option("--models", ev_models, "Comma separated: dqp, rm, dql, bfs, ehc, opt");
  ev->add_option("--levels", ev_levels, "Directory of .lvl files")->required();
  ev->add_option("--reps", ev_reps, "Repetitions per model and level (default from config)");
  ev->add_option("--timeout", ev_timeout, "Planner timeout in seconds (default from config)");
  ev->add_option("--out", ev_out, "Report path prefix; writes PREFIX.rows and PREFIX.txt")->required();
  ev->add_option("--dqp-model", ev_dqp, "Checkpoint of the subgoal network");
  ev->add_option("--dql-model", ev_dql, "Checkpoint of the action network");
  ev->add_flag("--no-timing", ev_no_timing, "Leave times out of the report");

  // play
  std::string py_level, py_actions;
  int py_needed = grid::kDefaultGemsNeeded;
  auto* py = app.add_subcommand("play", "Step through a level by hand (actions from --actions or stdin)");
  py->add_option("--level", py_level, "Level file")->required();
  py->add_option("--actions", py_actions, "Comma separated actions, e.g. UP,UP,USE");
  py->add_option("--gems-needed", py_needed, "Gems required before the exit opens");

  // config
  Common cf_common;
  std::string cf_out;
  auto* cf = app.add_subcommand("config", "Print the effective configuration with all defaults");
  cf_common.attach(cf);
  cf->add_option("--out", cf_out, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*gen) {
      RunConfig cfg = gen_common.config();
      fs::create_directories(gen_out);
      std::vector<grid::LevelSpec> levels(gen_count);
      parallel_for(gen_count, gen_common.jobs, [&](std::size_t i) {
        collect::GenConfig g = cfg.generator;
        g.seed = derive_seed(cfg.seed, gen_first + i);
        levels[i] = collect::gen_level(g);
      });
      std::vector<std::string> files;
      for (std::size_t i = 0; i < gen_count; ++i) {
        const std::string name = "level_" + pad3(gen_first + i) + ".lvl";
        grid::save_level_file((fs::path(gen_out) / name).string(), levels[i]);
        files.push_back(name);
      }
      write_manifest((fs::path(gen_out) / "manifest.json").string(), "gen-levels", args, cfg, {{"outputs", files}});
      info("wrote " + std::to_string(gen_count) + " levels to " + gen_out);
      return kOk;
    }

    if (*col) {
      RunConfig cfg = col_common.config();
      const bool dqp_mode = col_mode == "dqp";
      const std::size_t n = col_samples ? col_samples : (dqp_mode ? cfg.dqp_samples : cfg.dql_samples);
      const auto files = level_files(col_levels);
      const collect::CollectConfig cc = cfg.collect_config();
      std::vector<std::vector<learn::TransitionG>> g_parts(files.size());
      std::vector<std::vector<learn::TransitionA>> a_parts(files.size());
      std::vector<collect::CollectStats> stats(files.size());
      parallel_for(files.size(), col_common.jobs, [&](std::size_t i) {
        const grid::LevelSpec level = grid::load_level_file(files[i].string());
        const std::uint64_t seed = derive_seed(cfg.seed, i);
        if (dqp_mode) {
          g_parts[i] = collect::collect_dqp(level, n, seed, cc, &stats[i]);
        } else {
          a_parts[i] = collect::collect_dql(level, n, seed, cc, &stats[i]);
        }
      });
      learn::Dataset d;
      d.mode = dqp_mode ? learn::DatasetMode::kSubgoal : learn::DatasetMode::kAction;
      for (std::size_t i = 0; i < files.size(); ++i) {
        const std::size_t got = dqp_mode ? g_parts[i].size() : a_parts[i].size();
        d.meta.push_back({static_cast<int>(i), files[i].stem().string(), got, derive_seed(cfg.seed, i),
                          stats[i].planner_timeouts});
        for (auto& t : g_parts[i]) {
          t.level = static_cast<int>(i);
          d.subgoal.push_back(std::move(t));
        }
        for (auto& t : a_parts[i]) {
          t.level = static_cast<int>(i);
          d.action.push_back(std::move(t));
        }
        if (got < n) info(files[i].stem().string() + ": only " + std::to_string(got) + " unique samples");
        if (stats[i].planner_timeouts) {
          info(files[i].stem().string() + ": " + std::to_string(stats[i].planner_timeouts) + " planner timeouts skipped");
        }
      }
      if (fs::path(col_out).has_parent_path()) fs::create_directories(fs::path(col_out).parent_path());
      learn::save_dataset(col_out, d);
      write_manifest(col_out + ".manifest.json", "collect", args, cfg,
                     {{"mode", col_mode}, {"samples_per_level", n}, {"levels", files.size()}});
      info("wrote " + std::to_string(dqp_mode ? d.subgoal.size() : d.action.size()) + " samples to " + col_out);
      return kOk;
    }

    if (*tr) {
      RunConfig cfg = tr_common.config();
      require_file(tr_data);
      const learn::Dataset d = learn::load_dataset(tr_data);
      const bool dqp_mode = tr_mode == "dqp";
      if ((d.mode == learn::DatasetMode::kSubgoal) != dqp_mode) {
        throw ConfigError("dataset " + tr_data + " was not collected in mode " + tr_mode);
      }
      learn::TrainerConfig tc = dqp_mode ? cfg.dqp_trainer : cfg.dql_trainer;
      if (tr_iters >= 0) tc.iterations = tr_iters;
      tc.validate();
      learn::TrainHooks hooks;
      std::int64_t next_report = tc.log_every;
      if (verb == Verbosity::kDebug) {
        hooks.after_step = [&](std::int64_t done, const nn::Network&, const nn::Network&) {
          if (done >= next_report) {
            err << "iteration " << done << '\n';
            next_report += tc.log_every;
          }
        };
      }
      const nn::ArchSpec arch = dqp_mode ? learn::subgoal_arch(cfg.network) : learn::action_arch(cfg.network);
      const learn::TrainResult r = dqp_mode ? learn::train_g(d.subgoal, arch, tc, cfg.seed, hooks)
                                            : learn::train_a(d.action, arch, tc, cfg.seed, hooks);
      if (fs::path(tr_out).has_parent_path()) fs::create_directories(fs::path(tr_out).parent_path());
      const json meta = {{"mode", tr_mode}, {"iterations", tc.iterations}, {"dataset", fs::path(tr_data).filename().string()}};
      nn::save_checkpoint_file(tr_out, r.net, &r.adam, meta.dump());
      std::ofstream log(tr_out + ".log.csv");
      log << "iteration,loss,mean_abs_td\n";
      for (const auto& row : r.log) {
        log << row.iteration << ',' << json(row.loss).dump() << ',' << json(row.mean_abs_td).dump() << '\n';
      }
      write_manifest(tr_out + ".manifest.json", "train", args, cfg,
                     {{"mode", tr_mode}, {"iterations", tc.iterations}, {"syncs", r.syncs.size()}});
      if (!r.log.empty()) info("final loss " + json(r.log.back().loss).dump());
      info("wrote " + tr_out);
      return kOk;
    }

    if (*pl) {
      planner::SearchConfig sc{planner::strategy_from_name(pl_strategy), pl_weight, pl_timeout};
      pddl::GroundTask task;
      if (!pl_level.empty()) {
        require_file(pl_level);
        const grid::GameState s = grid::initial_state(grid::load_level_file(pl_level), pl_needed);
        pddl::ProblemDef problem;
        if (pl_subgoal == "level") {
          problem = pddl::bd::make_level_problem(s);
        } else if (pl_subgoal == "exit") {
          problem = pddl::bd::make_problem(s, {grid::SubgoalKind::kExit, s.exit});
        } else {
          const auto comma = pl_subgoal.find(',');
          if (comma == std::string::npos) throw CLI::ValidationError("--subgoal", "expected exit, level or X,Y");
          const grid::Cell c{std::stoi(pl_subgoal.substr(0, comma)), std::stoi(pl_subgoal.substr(comma + 1))};
          problem = pddl::bd::make_problem(s, {grid::SubgoalKind::kGem, c});
        }
        if (!pl_write.empty()) {
          fs::create_directories(pl_write);
          std::ofstream((fs::path(pl_write) / "domain.pddl").string()) << pddl::bd::domain_text();
          std::ofstream((fs::path(pl_write) / "problem.pddl").string()) << pddl::render_problem(problem);
        }
        task = pddl::ground(pddl::bd::domain(), problem);
      } else {
        if (pl_domain.empty() || pl_problem.empty()) {
          err << "plan needs --domain and --problem, or --level\n";
          return kUsage;
        }
        require_file(pl_domain);
        require_file(pl_problem);
        const pddl::DomainDef domain = pddl::parse_domain(pddl::read_text_file(pl_domain));
        const pddl::ProblemDef problem = pddl::parse_problem(pddl::read_text_file(pl_problem), domain);
        task = pddl::ground(domain, problem);
      }
      const planner::PlanOutcome r = planner::solve(task, sc);
      if (r.status == planner::Status::kSolved) {
        out << planner::format_plan(task, r.plan);
      } else {
        out << "; " << planner::status_name(r.status) << '\n';
      }
      info("expanded " + std::to_string(r.expanded) + " nodes in " + json(r.elapsed_s).dump() + " s");
      return kOk;
    }

    if (*ev) {
      RunConfig cfg = ev_common.config();
      const int reps = ev_reps > 0 ? ev_reps : cfg.eval_reps;
      eval::EpisodeConfig ec;
      ec.planner = cfg.planner;
      if (ev_timeout > 0) ec.planner.timeout_s = ev_timeout;
      ec.gems_needed = cfg.generator.gems_needed;
      std::vector<std::string> models;
      std::stringstream list(ev_models);
      for (std::string m; std::getline(list, m, ',');) {
        if (m.empty()) continue;
        if (m != "dqp" && m != "rm" && m != "dql" && m != "bfs" && m != "ehc" && m != "opt") {
          err << "unknown model " << m << '\n';
          return kUsage;
        }
        models.push_back(m);
      }
      nn::Network dqp_net, dql_net;
      auto need = [&](const std::string& m, const std::string& path, nn::Network& net, int side) {
        if (std::find(models.begin(), models.end(), m) == models.end()) return;
        if (path.empty()) throw ConfigError("model " + m + " needs --" + m + "-model");
        require_file(path);
        net = nn::load_checkpoint_file(path);
        if (net.arch().side != side) throw ConfigError(path + " is not a " + m + " network");
      };
      need("dqp", ev_dqp, dqp_net, 0);
      need("dql", ev_dql, dql_net, learn::kActionSide);

      const auto files = level_files(ev_levels);
      struct Job {
        std::size_t level;
        std::string model;
        int rep;
      };
      std::vector<Job> jobs;
      for (std::size_t l = 0; l < files.size(); ++l)
        for (const std::string& m : models) {
          // Planner-only runs are deterministic; one repetition is enough.
          const int n = (m == "bfs" || m == "ehc" || m == "opt") ? 1 : reps;
          for (int r = 0; r < n; ++r) jobs.push_back({l, m, r});
        }
      std::vector<grid::LevelSpec> levels;
      for (const auto& f : files) levels.push_back(grid::load_level_file(f.string()));
      std::vector<eval::EpisodeResult> results(jobs.size());
      parallel_for(jobs.size(), ev_common.jobs, [&](std::size_t j) {
        const Job& job = jobs[j];
        const grid::LevelSpec& level = levels[job.level];
        const std::uint64_t seed = derive_seed(cfg.seed, job.level * 1000 + static_cast<std::size_t>(job.rep));
        eval::EpisodeResult r;
        if (job.model == "dqp") {
          r = eval::run_dqp_episode(level, dqp_net, ec);
          r.seed = static_cast<std::uint64_t>(job.rep);
        } else if (job.model == "rm") {
          r = eval::run_random_episode(level, seed, ec);
        } else if (job.model == "dql") {
          r = eval::run_dql_episode(level, dql_net, seed, cfg.dql_max_actions, ec.gems_needed);
        } else {
          planner::SearchConfig sc = ec.planner;
          sc.strategy = job.model == "bfs" ? planner::Strategy::kWbfs : planner::strategy_from_name(job.model);
          r = eval::run_planner_only(level, sc, ec.gems_needed);
        }
        r.model = job.model;
        r.level = files[job.level].stem().string();
        results[j] = std::move(r);
      });

      std::string prefix = ev_out;
      for (const char* ext : {".rows", ".txt"}) {
        if (prefix.size() > 4 && fs::path(prefix).extension() == ext) prefix = prefix.substr(0, prefix.size() - std::string(ext).size());
      }
      if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
      const eval::Report report = eval::emit_report(results, !ev_no_timing);
      std::ofstream(prefix + ".rows") << report.rows;
      std::ofstream(prefix + ".txt") << report.table;
      write_manifest(prefix + ".manifest.json", "eval", args, cfg,
                     {{"models", models}, {"reps", reps}, {"levels", files.size()}, {"timeout_s", ec.planner.timeout_s}});
      out << report.table;
      std::size_t timeouts = 0;
      for (const auto& r : results) timeouts += r.timed_out;
      if (!results.empty() && 2 * timeouts > results.size()) {
        err << timeouts << " of " << results.size() << " episodes hit the planner timeout\n";
        return kTimeoutDominated;
      }
      return kOk;
    }

    if (*py) {
      require_file(py_level);
      grid::GameState s = grid::initial_state(grid::load_level_file(py_level), py_needed);
      auto show = [&] {
        out << grid::render_state(s) << "orientation " << grid::orientation_name(s.orientation) << ", gems "
            << s.gems_collected << "/" << s.gems_needed << (s.exited ? ", level finished" : "") << "\n";
      };
      show();
      auto step = [&](std::string name) {
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        if (name.empty()) return true;
        if (name == "QUIT") return false;
        s = grid::apply_action(s, grid::action_from_name(name));
        out << name << "\n";
        show();
        return !s.exited;
      };
      if (!py_actions.empty()) {
        std::stringstream list(py_actions);
        for (std::string a; std::getline(list, a, ',') && step(a);) {
        }
      } else {
        for (std::string line; std::getline(in, line) && step(line);) {
        }
      }
      return kOk;
    }

    if (*cf) {
      const RunConfig cfg = cf_common.config();
      if (cf_out.empty()) {
        out << cfg.to_json_text();
      } else {
        std::ofstream(cf_out) << cfg.to_json_text();
      }
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kBadConfig;
  } catch (const MissingFile& e) {
    err << e.what() << '\n';
    return kMissingFile;
  } catch (const std::ios_base::failure& e) {
    err << e.what() << '\n';
    return kMissingFile;
  } catch (const CLI::ValidationError& e) {
    err << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace dqp::cli
