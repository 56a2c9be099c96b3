#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dqp/pddl/ast.hpp"

namespace dqp::pddl {

class GroundingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Prefix of compiled complement predicates: not-P holds iff P does not.
inline constexpr const char* kComplementPrefix = "not-";

struct GroundEffect {
  std::vector<int> condition;  // empty = unconditional
  std::vector<int> add;
  std::vector<int> del;

  friend bool operator==(const GroundEffect&, const GroundEffect&) = default;
};

struct GroundAction {
  std::string name;
  std::vector<std::string> args;
  std::vector<int> pre;
  std::vector<GroundEffect> effects;

  std::string label() const;  // "(name a b c)"

  friend bool operator==(const GroundAction&, const GroundAction&) = default;
};

struct GroundTask {
  std::vector<GroundAtom> atoms;  // sorted; complements use the "not-" prefix
  std::vector<GroundAction> actions;  // sorted by label
  std::vector<int> init;  // sorted atom indices
  std::vector<int> goal;  // sorted atom indices

  int find_atom(const GroundAtom& a) const;  // binary search, -1 when absent
  std::string atom_name(int index) const;
  // Index of the complement partner, or -1.
  int complement_of(int index) const;

  friend bool operator==(const GroundTask&, const GroundTask&) = default;
};

struct GroundOptions {
  std::size_t max_atoms = 2'000'000;
  std::size_t max_actions = 2'000'000;
};

GroundTask ground(const DomainDef& domain, const ProblemDef& problem,
                  const GroundOptions& options = {});

}  // namespace dqp::pddl
