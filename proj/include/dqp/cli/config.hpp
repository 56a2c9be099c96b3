#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dqp/collect/collect.hpp"
#include "dqp/learn/qlearn.hpp"
#include "dqp/nn/network.hpp"
#include "dqp/planner.hpp"

namespace dqp::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Paths {
  std::string levels = "levels";
  std::string datasets = "data";
  std::string checkpoints = "models";
  std::string reports = "reports";
};

struct RunConfig {
  std::uint64_t seed = 0;
  Paths paths;
  collect::GenConfig generator;
  planner::SearchConfig planner{planner::Strategy::kWbfs, 5, 3600.0};
  double collect_timeout_s = 10.0;
  learn::TrainerConfig dqp_trainer = learn::TrainerConfig::dqp();
  learn::TrainerConfig dql_trainer = learn::TrainerConfig::dql();
  std::string network_preset = "desk";  // "desk", "full" or "custom"
  nn::ArchSpec network = nn::ArchSpec::desk();
  std::size_t dqp_samples = 500;
  std::size_t dql_samples = 5000;
  int random_walk_max = 10;
  int eval_reps = 10;
  int dql_max_actions = 2000;

  // Every key has a default; unknown keys and out-of-range values throw ConfigError.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json_text() const;  // pretty printed, all keys
  void validate() const;

  collect::CollectConfig collect_config() const;
};

}  // namespace dqp::cli
