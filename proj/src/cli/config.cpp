#include "dqp/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dqp::cli {

namespace {

using nlohmann::json;

// Reads keys of one object, remembering which were used so that typos in a
// config file are reported instead of silently ignored.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + " has the wrong type");
    }
  }

  Section sub(const char* key) {
    used_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, name_ + "." + key);
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown config key " + name_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

json trainer_json(const learn::TrainerConfig& t) {
  return {{"gamma", t.gamma},
          {"penalty", t.penalty},
          {"final_reward", t.final_reward},
          {"tau", t.tau},
          {"learning_rate", t.lr},
          {"batch", t.batch},
          {"iterations", t.iterations},
          {"double_q", t.double_q},
          {"importance_weights", t.importance_weights},
          {"per_alpha", t.per_alpha},
          {"per_beta_start", t.per_beta_start},
          {"per_beta_end", t.per_beta_end},
          {"per_eps", t.per_eps},
          {"argmin_refresh", t.argmin_refresh},
          {"log_every", t.log_every},
          {"precise_bn", t.precise_bn}};
}

void read_trainer(Section s, learn::TrainerConfig& t) {
  s.read("gamma", t.gamma);
  s.read("penalty", t.penalty);
  s.read("final_reward", t.final_reward);
  s.read("tau", t.tau);
  s.read("learning_rate", t.lr);
  s.read("batch", t.batch);
  s.read("iterations", t.iterations);
  s.read("double_q", t.double_q);
  s.read("importance_weights", t.importance_weights);
  s.read("per_alpha", t.per_alpha);
  s.read("per_beta_start", t.per_beta_start);
  s.read("per_beta_end", t.per_beta_end);
  s.read("per_eps", t.per_eps);
  s.read("argmin_refresh", t.argmin_refresh);
  s.read("log_every", t.log_every);
  s.read("precise_bn", t.precise_bn);
  s.finish();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "config");
  top.read("seed", c.seed);
  {
    Section p = top.sub("paths");
    p.read("levels", c.paths.levels);
    p.read("datasets", c.paths.datasets);
    p.read("checkpoints", c.paths.checkpoints);
    p.read("reports", c.paths.reports);
    p.finish();
  }
  {
    Section g = top.sub("generator");
    g.read("width", c.generator.width);
    g.read("height", c.generator.height);
    g.read("gem_count", c.generator.gem_count);
    g.read("boulder_density", c.generator.boulder_density);
    g.read("dirt_density", c.generator.dirt_density);
    g.read("gems_needed", c.generator.gems_needed);
    g.read("max_attempts", c.generator.max_attempts);
    g.finish();
  }
  {
    Section p = top.sub("planner");
    std::string strategy = planner::strategy_name(c.planner.strategy);
    p.read("strategy", strategy);
    try {
      c.planner.strategy = planner::strategy_from_name(strategy);
    } catch (const std::exception&) {
      throw ConfigError("planner.strategy must be opt, wbfs or ehc");
    }
    p.read("weight", c.planner.weight);
    p.read("timeout_s", c.planner.timeout_s);
    p.read("collect_timeout_s", c.collect_timeout_s);
    p.finish();
  }
  read_trainer(top.sub("dqp_trainer"), c.dqp_trainer);
  read_trainer(top.sub("dql_trainer"), c.dql_trainer);
  {
    Section n = top.sub("network");
    n.read("preset", c.network_preset);
    if (c.network_preset == "desk") {
      c.network = nn::ArchSpec::desk();
    } else if (c.network_preset == "full") {
      c.network = nn::ArchSpec::full();
    } else if (c.network_preset != "custom") {
      throw ConfigError("network.preset must be desk, full or custom");
    }
    std::vector<std::vector<int>> convs;
    for (const auto& cv : c.network.convs) convs.push_back({cv.filters, cv.kernel, cv.stride});
    n.read("convs", convs);
    c.network.convs.clear();
    for (const auto& cv : convs) {
      if (cv.size() != 3) throw ConfigError("network.convs entries are [filters, kernel, stride]");
      c.network.convs.push_back({cv[0], cv[1], cv[2]});
    }
    n.read("hidden", c.network.hidden);
    n.read("bn_momentum", c.network.bn_momentum);
    n.read("bn_eps", c.network.bn_eps);
    n.read("output_scale", c.network.output_scale);
    if (c.network_preset != "custom" &&
        !(c.network == (c.network_preset == "desk" ? nn::ArchSpec::desk() : nn::ArchSpec::full()))) {
      throw ConfigError("network layers differ from preset " + c.network_preset + "; use preset \"custom\"");
    }
    n.finish();
  }
  {
    Section s = top.sub("collect");
    s.read("dqp_samples", c.dqp_samples);
    s.read("dql_samples", c.dql_samples);
    s.read("random_walk_max", c.random_walk_max);
    s.finish();
  }
  {
    Section e = top.sub("eval");
    e.read("reps", c.eval_reps);
    e.read("dql_max_actions", c.dql_max_actions);
    e.finish();
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config " + path);
  std::stringstream text;
  text << in.rdbuf();
  return from_json_text(text.str());
}

std::string RunConfig::to_json_text() const {
  json convs = json::array();
  for (const auto& cv : network.convs) convs.push_back({cv.filters, cv.kernel, cv.stride});
  json root = {
      {"seed", seed},
      {"paths",
       {{"levels", paths.levels}, {"datasets", paths.datasets}, {"checkpoints", paths.checkpoints}, {"reports", paths.reports}}},
      {"generator",
       {{"width", generator.width},
        {"height", generator.height},
        {"gem_count", generator.gem_count},
        {"boulder_density", generator.boulder_density},
        {"dirt_density", generator.dirt_density},
        {"gems_needed", generator.gems_needed},
        {"max_attempts", generator.max_attempts}}},
      {"planner",
       {{"strategy", planner::strategy_name(planner.strategy)},
        {"weight", planner.weight},
        {"timeout_s", planner.timeout_s},
        {"collect_timeout_s", collect_timeout_s}}},
      {"dqp_trainer", trainer_json(dqp_trainer)},
      {"dql_trainer", trainer_json(dql_trainer)},
      {"network",
       {{"preset", network_preset},
        {"convs", convs},
        {"hidden", network.hidden},
        {"bn_momentum", network.bn_momentum},
        {"bn_eps", network.bn_eps},
        {"output_scale", network.output_scale}}},
      {"collect", {{"dqp_samples", dqp_samples}, {"dql_samples", dql_samples}, {"random_walk_max", random_walk_max}}},
      {"eval", {{"reps", eval_reps}, {"dql_max_actions", dql_max_actions}}}};
  return root.dump(2) + "\n";
}

void RunConfig::validate() const {
  try {
    generator.validate();
    dqp_trainer.validate();
    dql_trainer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (planner.weight < 1) throw ConfigError("planner.weight must be at least 1");
  if (!(planner.timeout_s > 0) || !(collect_timeout_s > 0)) throw ConfigError("planner timeouts must be positive");
  if (network.convs.empty()) throw ConfigError("network needs at least one convolution");
  for (const auto& cv : network.convs) {
    if (cv.filters < 1 || cv.kernel < 1 || cv.stride < 1) throw ConfigError("network.convs values must be positive");
  }
  for (int h : network.hidden) {
    if (h < 1) throw ConfigError("network.hidden sizes must be positive");
  }
  try {
    (void)nn::layer_shapes(network);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("network does not fit a 30x30 input: ") + e.what());
  }
  if (dqp_samples < 1 || dql_samples < 1) throw ConfigError("sample counts must be positive");
  if (random_walk_max < 1) throw ConfigError("collect.random_walk_max must be at least 1");
  if (eval_reps < 1) throw ConfigError("eval.reps must be at least 1");
  if (dql_max_actions < 1) throw ConfigError("eval.dql_max_actions must be at least 1");
}

collect::CollectConfig RunConfig::collect_config() const {
  collect::CollectConfig c;
  c.planner = planner;
  c.planner.timeout_s = collect_timeout_s;
  c.gems_needed = generator.gems_needed;
  c.penalty = dqp_trainer.penalty;
  c.final_reward = dqp_trainer.final_reward;
  c.random_walk_max = random_walk_max;
  return c;
}

}  // namespace dqp::cli
