#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dqp/learn/qlearn.hpp"

namespace dqp::learn {

enum class DatasetMode { kSubgoal, kAction };  // "dqp" / "dql"

struct DatasetMeta {
  int level = 0;
  std::string level_name;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t planner_timeouts = 0;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  DatasetMode mode = DatasetMode::kSubgoal;
  std::vector<DatasetMeta> meta;
  std::vector<TransitionG> subgoal;  // kSubgoal
  std::vector<TransitionA> action;   // kAction
};

// JSON lines: a header object, then one record per sample. States are stored
// as level text plus exit cell, orientation and gem counters.
void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);  // throws std::runtime_error

std::string state_text(const grid::GameState& s);  // single-line JSON object
grid::GameState state_from_text(const std::string& json);

}  // namespace dqp::learn
