#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqp::pddl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(what + " at line " + std::to_string(line) + ", column " +
                           std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Raised for semantic problems that have no useful source position
// (undeclared names, arity mismatches found after parsing).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TypedName {
  std::string name;
  std::string type;  // "object" when untyped

  friend bool operator==(const TypedName&, const TypedName&) = default;
};

struct Formula {
  enum class Kind { kAtom, kNot, kAnd, kExists };

  Kind kind = Kind::kAnd;
  std::string predicate;           // kAtom
  std::vector<std::string> args;   // kAtom: variables start with '?'
  std::vector<Formula> children;   // kNot: one child, kAnd: any, kExists: one body
  std::vector<TypedName> variables;  // kExists: exactly one

  static Formula atom(std::string pred, std::vector<std::string> args);
  static Formula negation(Formula f);
  static Formula conjunction(std::vector<Formula> parts);
  static Formula exists(TypedName var, Formula body);

  bool is_empty_conjunction() const { return kind == Kind::kAnd && children.empty(); }

  friend bool operator==(const Formula&, const Formula&) = default;
};

struct Literal {
  bool positive = true;
  std::string predicate;
  std::vector<std::string> args;

  friend bool operator==(const Literal&, const Literal&) = default;
};

// One unconditional effect group (no condition) or one `when` clause.
struct EffectClause {
  std::optional<Formula> condition;
  std::vector<Literal> literals;

  friend bool operator==(const EffectClause&, const EffectClause&) = default;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedName> parameters;
  Formula precondition;  // empty conjunction when absent
  std::vector<EffectClause> effects;

  friend bool operator==(const ActionSchema&, const ActionSchema&) = default;
};

struct PredicateSchema {
  std::string name;
  std::vector<TypedName> parameters;

  friend bool operator==(const PredicateSchema&, const PredicateSchema&) = default;
};

struct DomainDef {
  std::string name;
  std::vector<std::string> requirements;
  std::vector<TypedName> types;  // (type, parent)
  std::vector<TypedName> constants;
  std::vector<PredicateSchema> predicates;
  std::vector<ActionSchema> actions;

  const PredicateSchema* find_predicate(const std::string& name) const;
  const ActionSchema* find_action(const std::string& name) const;
  bool has_type(const std::string& type) const;
  // True when `sub` equals `super` or inherits from it.
  bool is_subtype(const std::string& sub, const std::string& super) const;

  friend bool operator==(const DomainDef&, const DomainDef&) = default;
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  friend bool operator==(const GroundAtom&, const GroundAtom&) = default;
  friend auto operator<=>(const GroundAtom&, const GroundAtom&) = default;
};

struct ProblemDef {
  std::string name;
  std::string domain_name;
  std::vector<TypedName> objects;
  std::vector<GroundAtom> init;
  std::vector<Literal> goal;  // conjunction of ground literals

  friend bool operator==(const ProblemDef&, const ProblemDef&) = default;
};

}  // namespace dqp::pddl
