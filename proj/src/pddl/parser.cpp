#include "dqp/pddl/parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dqp::pddl {

Formula Formula::atom(std::string pred, std::vector<std::string> args) {
  Formula f;
  f.kind = Kind::kAtom;
  f.predicate = std::move(pred);
  f.args = std::move(args);
  return f;
}

Formula Formula::negation(Formula inner) {
  Formula f;
  f.kind = Kind::kNot;
  f.children.push_back(std::move(inner));
  return f;
}

Formula Formula::conjunction(std::vector<Formula> parts) {
  Formula f;
  f.kind = Kind::kAnd;
  f.children = std::move(parts);
  return f;
}

Formula Formula::exists(TypedName var, Formula body) {
  Formula f;
  f.kind = Kind::kExists;
  f.variables.push_back(std::move(var));
  f.children.push_back(std::move(body));
  return f;
}

const PredicateSchema* DomainDef::find_predicate(const std::string& n) const {
  for (const auto& p : predicates) {
    if (p.name == n) return &p;
  }
  return nullptr;
}

const ActionSchema* DomainDef::find_action(const std::string& n) const {
  for (const auto& a : actions) {
    if (a.name == n) return &a;
  }
  return nullptr;
}

bool DomainDef::has_type(const std::string& type) const {
  if (type == "object") return true;
  return std::any_of(types.begin(), types.end(), [&](const TypedName& t) { return t.name == type; });
}

bool DomainDef::is_subtype(const std::string& sub, const std::string& super) const {
  std::string cur = sub;
  for (std::size_t guard = 0; guard <= types.size() + 1; ++guard) {
    if (cur == super || super == "object") return true;
    auto it = std::find_if(types.begin(), types.end(),
                           [&](const TypedName& t) { return t.name == cur; });
    if (it == types.end() || it->type == cur) return false;
    cur = it->type;
  }
  return false;
}

namespace {

struct Node {
  bool is_list = false;
  std::string atom;
  std::vector<Node> items;
  int line = 1;
  int column = 1;
};

[[noreturn]] void fail(const Node& n, const std::string& what) {
  throw ParseError(what, n.line, n.column);
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Node read_document() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty input", line_, column_);
    Node root = read_node();
    skip_space();
    if (pos_ < text_.size()) throw ParseError("trailing input after definition", line_, column_);
    return root;
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Node read_node() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unbalanced parentheses: unexpected end of input", line_, column_);
    Node n;
    n.line = line_;
    n.column = column_;
    const char c = text_[pos_];
    if (c == ')') throw ParseError("unbalanced parentheses: unexpected ')'", line_, column_);
    if (c == '(') {
      n.is_list = true;
      advance();
      while (true) {
        skip_space();
        if (pos_ >= text_.size()) {
          throw ParseError("unbalanced parentheses: list opened here is never closed", n.line, n.column);
        }
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        n.items.push_back(read_node());
      }
      return n;
    }
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(ch)) || ch == '(' || ch == ')' || ch == ';') break;
      const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' ||
                      ch == '?' || ch == ':' || ch == '.' || ch == '=' || ch == '<' || ch == '>' ||
                      ch == '+' || ch == '*' || ch == '/';
      if (!ok) throw ParseError(std::string("lexical error: unexpected character '") + ch + "'", line_, column_);
      n.atom.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      advance();
    }
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

const std::set<std::string> kSupportedRequirements = {
    ":strips", ":typing", ":negative-preconditions", ":existential-preconditions",
    ":conditional-effects"};

const std::set<std::string> kUnsupportedHeads = {
    "or", "imply", "forall", "=", "<", ">", "<=", ">=", "increase", "decrease",
    "assign", "scale-up", "scale-down", "either", "preference"};

bool is_keyword(const Node& n, const char* kw) { return !n.is_list && n.atom == kw; }

const std::string& head(const Node& list) {
  static const std::string empty;
  if (!list.is_list || list.items.empty() || list.items[0].is_list) return empty;
  return list.items[0].atom;
}

std::string expect_atom(const Node& n, const char* what) {
  if (n.is_list) fail(n, std::string("expected ") + what + ", found a list");
  return n.atom;
}

// Parses "a b - t c - u d" style lists. Items are nodes items[from..].
std::vector<TypedName> parse_typed_list(const Node& list, std::size_t from, bool variables) {
  std::vector<TypedName> out;
  std::size_t pending_start = 0;
  for (std::size_t i = from; i < list.items.size(); ++i) {
    const Node& item = list.items[i];
    if (item.is_list) {
      if (head(item) == "either") fail(item, "unsupported feature: either types");
      fail(item, "expected a name in typed list");
    }
    if (item.atom == "-") {
      if (i + 1 >= list.items.size()) fail(item, "missing type after '-'");
      const Node& type = list.items[i + 1];
      if (type.is_list) fail(type, "unsupported feature: either types");
      if (pending_start == out.size()) fail(item, "'-' without preceding names");
      for (std::size_t k = pending_start; k < out.size(); ++k) out[k].type = type.atom;
      pending_start = out.size();
      ++i;
      continue;
    }
    const bool is_var = !item.atom.empty() && item.atom[0] == '?';
    if (variables != is_var) {
      fail(item, variables ? "expected a variable" : "unexpected variable '" + item.atom + "'");
    }
    out.push_back({item.atom, "object"});
  }
  return out;
}

class DomainBuilder {
 public:
  DomainDef build(const Node& root) {
    if (!root.is_list || head(root) != "define") fail(root, "expected (define ...)");
    if (root.items.size() < 2 || !root.items[1].is_list || head(root.items[1]) != "domain" ||
        root.items[1].items.size() != 2) {
      fail(root, "expected (domain <name>)");
    }
    d_.name = expect_atom(root.items[1].items[1], "domain name");
    for (std::size_t i = 2; i < root.items.size(); ++i) {
      const Node& sec = root.items[i];
      const std::string& h = head(sec);
      if (h == ":requirements") {
        for (std::size_t k = 1; k < sec.items.size(); ++k) {
          const std::string req = expect_atom(sec.items[k], "requirement");
          if (!kSupportedRequirements.count(req)) {
            fail(sec.items[k], "unsupported feature: requirement " + req);
          }
          d_.requirements.push_back(req);
        }
      } else if (h == ":types") {
        d_.types = parse_typed_list(sec, 1, false);
      } else if (h == ":constants") {
        d_.constants = parse_typed_list(sec, 1, false);
      } else if (h == ":predicates") {
        for (std::size_t k = 1; k < sec.items.size(); ++k) parse_predicate(sec.items[k]);
      } else if (h == ":action") {
        parse_action(sec);
      } else if (h == ":functions" || h == ":durative-action" || h == ":derived" ||
                 h == ":process" || h == ":event" || h == ":constraints") {
        fail(sec, "unsupported feature: " + h);
      } else {
        fail(sec, "unknown domain section '" + h + "'");
      }
    }
    check_types();
    return std::move(d_);
  }

 private:
  void check_types() {
    std::set<std::string> seen;
    for (const auto& t : d_.types) {
      if (!seen.insert(t.name).second) throw ValidationError("duplicate type " + t.name);
    }
    for (const auto& t : d_.types) {
      if (!d_.has_type(t.type)) throw ValidationError("undeclared type " + t.type);
    }
    for (const auto& c : d_.constants) {
      if (!d_.has_type(c.type)) throw ValidationError("undeclared type " + c.type);
    }
  }

  void require_type(const Node& at, const std::string& type) {
    // Types may be declared after use inside the same file only through :types,
    // which always precedes predicates in practice; check eagerly.
    if (!d_.has_type(type)) fail(at, "undeclared type '" + type + "'");
  }

  void parse_predicate(const Node& n) {
    if (!n.is_list || n.items.empty()) fail(n, "expected predicate declaration");
    PredicateSchema p;
    p.name = expect_atom(n.items[0], "predicate name");
    p.parameters = parse_typed_list(n, 1, true);
    for (const auto& param : p.parameters) require_type(n, param.type);
    if (d_.find_predicate(p.name)) fail(n, "duplicate predicate '" + p.name + "'");
    d_.predicates.push_back(std::move(p));
  }

  void parse_action(const Node& n) {
    if (n.items.size() < 2) fail(n, "expected action name");
    ActionSchema a;
    a.name = expect_atom(n.items[1], "action name");
    if (d_.find_action(a.name)) fail(n, "duplicate action '" + a.name + "'");
    a.precondition = Formula::conjunction({});
    std::map<std::string, std::string> scope;
    for (std::size_t i = 2; i < n.items.size(); i += 2) {
      const Node& key = n.items[i];
      if (i + 1 >= n.items.size()) fail(key, "missing value for " + key.atom);
      const Node& value = n.items[i + 1];
      if (is_keyword(key, ":parameters")) {
        if (!value.is_list) fail(value, "expected parameter list");
        a.parameters = parse_typed_list(value, 0, true);
        for (const auto& p : a.parameters) {
          require_type(value, p.type);
          if (!scope.emplace(p.name, p.type).second) fail(value, "duplicate parameter " + p.name);
        }
      } else if (is_keyword(key, ":precondition")) {
        a.precondition = parse_formula(value, scope);
      } else if (is_keyword(key, ":effect")) {
        parse_effect(value, scope, a.effects);
      } else {
        fail(key, "unknown action keyword '" + key.atom + "'");
      }
    }
    normalise_effects(a.effects);
    d_.actions.push_back(std::move(a));
  }

  void check_args(const Node& at, const PredicateSchema& p, const std::vector<std::string>& args,
                  const std::map<std::string, std::string>& scope) {
    if (args.size() != p.parameters.size()) {
      fail(at, "arity mismatch for '" + p.name + "': expected " +
                   std::to_string(p.parameters.size()) + ", got " + std::to_string(args.size()));
    }
    for (std::size_t k = 0; k < args.size(); ++k) {
      std::string type;
      if (args[k][0] == '?') {
        auto it = scope.find(args[k]);
        if (it == scope.end()) fail(at, "free variable " + args[k]);
        type = it->second;
      } else {
        auto it = std::find_if(d_.constants.begin(), d_.constants.end(),
                               [&](const TypedName& c) { return c.name == args[k]; });
        if (it == d_.constants.end()) fail(at, "unknown constant '" + args[k] + "'");
        type = it->type;
      }
      if (!d_.is_subtype(type, p.parameters[k].type)) {
        fail(at, "type mismatch: " + args[k] + " - " + type + " used as " + p.parameters[k].type);
      }
    }
  }

  Formula parse_atom(const Node& n, const std::map<std::string, std::string>& scope) {
    const std::string& name = head(n);
    const PredicateSchema* p = d_.find_predicate(name);
    if (!p) fail(n, "undeclared predicate '" + name + "'");
    std::vector<std::string> args;
    for (std::size_t k = 1; k < n.items.size(); ++k) args.push_back(expect_atom(n.items[k], "term"));
    check_args(n, *p, args, scope);
    return Formula::atom(name, std::move(args));
  }

  Formula parse_formula(const Node& n, const std::map<std::string, std::string>& scope) {
    if (!n.is_list) fail(n, "expected a formula");
    if (n.items.empty()) return Formula::conjunction({});
    const std::string& h = head(n);
    if (h.empty()) fail(n, "expected a formula head");
    if (h == "and") {
      std::vector<Formula> parts;
      for (std::size_t k = 1; k < n.items.size(); ++k) parts.push_back(parse_formula(n.items[k], scope));
      return Formula::conjunction(std::move(parts));
    }
    if (h == "not") {
      if (n.items.size() != 2) fail(n, "'not' takes exactly one argument");
      return Formula::negation(parse_formula(n.items[1], scope));
    }
    if (h == "exists") {
      if (n.items.size() != 3 || !n.items[1].is_list) fail(n, "malformed exists");
      auto vars = parse_typed_list(n.items[1], 0, true);
      if (vars.size() != 1) fail(n, "unsupported feature: exists must bind exactly one variable");
      require_type(n.items[1], vars[0].type);
      auto inner = scope;
      inner[vars[0].name] = vars[0].type;
      return Formula::exists(vars[0], parse_formula(n.items[2], inner));
    }
    if (kUnsupportedHeads.count(h)) fail(n, "unsupported feature: " + h);
    return parse_atom(n, scope);
  }

  Literal parse_literal(const Node& n, const std::map<std::string, std::string>& scope) {
    const std::string& h = head(n);
    if (h == "not") {
      if (n.items.size() != 2) fail(n, "'not' takes exactly one argument");
      Formula a = parse_atom(n.items[1], scope);
      return {false, a.predicate, a.args};
    }
    if (kUnsupportedHeads.count(h)) fail(n, "unsupported feature: " + h);
    Formula a = parse_atom(n, scope);
    return {true, a.predicate, a.args};
  }

  void parse_effect(const Node& n, const std::map<std::string, std::string>& scope,
                    std::vector<EffectClause>& out, bool nested_in_when = false) {
    if (!n.is_list) fail(n, "expected an effect");
    if (n.items.empty()) return;
    const std::string& h = head(n);
    if (h == "and") {
      for (std::size_t k = 1; k < n.items.size(); ++k) parse_effect(n.items[k], scope, out, nested_in_when);
      return;
    }
    if (h == "when") {
      if (nested_in_when) fail(n, "unsupported feature: nested when");
      if (n.items.size() != 3) fail(n, "malformed when");
      EffectClause clause;
      clause.condition = parse_formula(n.items[1], scope);
      std::vector<EffectClause> body;
      parse_effect(n.items[2], scope, body, true);
      for (auto& b : body) {
        for (auto& lit : b.literals) clause.literals.push_back(std::move(lit));
      }
      out.push_back(std::move(clause));
      return;
    }
    if (h == "forall") fail(n, "unsupported feature: forall effects");
    EffectClause* plain = nullptr;
    for (auto& c : out) {
      if (!c.condition) plain = &c;
    }
    if (!plain) {
      out.push_back({});
      plain = &out.back();
    }
    plain->literals.push_back(parse_literal(n, scope));
  }

  static void normalise_effects(std::vector<EffectClause>& effects) {
    std::stable_partition(effects.begin(), effects.end(),
                          [](const EffectClause& c) { return !c.condition.has_value(); });
  }

  DomainDef d_;
};

class ProblemBuilder {
 public:
  explicit ProblemBuilder(const DomainDef& d) : d_(d) {}

  ProblemDef build(const Node& root) {
    if (!root.is_list || head(root) != "define") fail(root, "expected (define ...)");
    if (root.items.size() < 2 || head(root.items[1]) != "problem" || root.items[1].items.size() != 2) {
      fail(root, "expected (problem <name>)");
    }
    p_.name = expect_atom(root.items[1].items[1], "problem name");
    for (const auto& c : d_.constants) types_[c.name] = c.type;
    bool have_goal = false;
    for (std::size_t i = 2; i < root.items.size(); ++i) {
      const Node& sec = root.items[i];
      const std::string& h = head(sec);
      if (h == ":domain") {
        if (sec.items.size() != 2) fail(sec, "malformed :domain");
        p_.domain_name = expect_atom(sec.items[1], "domain name");
        if (p_.domain_name != d_.name) {
          fail(sec, "problem refers to domain '" + p_.domain_name + "', expected '" + d_.name + "'");
        }
      } else if (h == ":objects") {
        p_.objects = parse_typed_list(sec, 1, false);
        for (const auto& o : p_.objects) {
          if (!d_.has_type(o.type)) fail(sec, "undeclared object type '" + o.type + "'");
          if (!types_.emplace(o.name, o.type).second) fail(sec, "duplicate object '" + o.name + "'");
        }
      } else if (h == ":init") {
        for (std::size_t k = 1; k < sec.items.size(); ++k) {
          const Node& a = sec.items[k];
          if (head(a) == "=" ) fail(a, "unsupported feature: numeric fluents");
          if (head(a) == "not") fail(a, "negative literals are not allowed in :init");
          p_.init.push_back(parse_ground_atom(a));
        }
      } else if (h == ":goal") {
        if (sec.items.size() != 2) fail(sec, "malformed :goal");
        parse_goal(sec.items[1]);
        have_goal = true;
      } else if (h == ":requirements") {
        // Problem-level requirements are accepted and ignored.
      } else if (h == ":metric") {
        fail(sec, "unsupported feature: :metric");
      } else {
        fail(sec, "unknown problem section '" + h + "'");
      }
    }
    if (!have_goal) fail(root, "problem has no :goal");
    return std::move(p_);
  }

 private:
  GroundAtom parse_ground_atom(const Node& n) {
    const std::string& name = head(n);
    if (name.empty()) fail(n, "expected a ground atom");
    if (kUnsupportedHeads.count(name)) fail(n, "unsupported feature: " + name);
    const PredicateSchema* p = d_.find_predicate(name);
    if (!p) fail(n, "unknown predicate '" + name + "'");
    if (n.items.size() - 1 != p->parameters.size()) {
      fail(n, "arity mismatch for '" + name + "': expected " + std::to_string(p->parameters.size()) +
                  ", got " + std::to_string(n.items.size() - 1));
    }
    GroundAtom atom{name, {}};
    for (std::size_t k = 1; k < n.items.size(); ++k) {
      std::string obj = expect_atom(n.items[k], "object");
      auto it = types_.find(obj);
      if (it == types_.end()) fail(n.items[k], "unknown object '" + obj + "'");
      if (!d_.is_subtype(it->second, p->parameters[k - 1].type)) {
        fail(n.items[k], "type mismatch: " + obj + " - " + it->second + " used as " +
                             p->parameters[k - 1].type);
      }
      atom.args.push_back(std::move(obj));
    }
    return atom;
  }

  void parse_goal(const Node& n) {
    const std::string& h = head(n);
    if (h == "and") {
      for (std::size_t k = 1; k < n.items.size(); ++k) parse_goal(n.items[k]);
      return;
    }
    if (h == "not") {
      if (n.items.size() != 2) fail(n, "'not' takes exactly one argument");
      GroundAtom a = parse_ground_atom(n.items[1]);
      p_.goal.push_back({false, a.predicate, a.args});
      return;
    }
    if (h == "exists" || h == "or" || h == "forall" || h == "imply") {
      fail(n, "unsupported feature: " + h + " in goal");
    }
    GroundAtom a = parse_ground_atom(n);
    p_.goal.push_back({true, a.predicate, a.args});
  }

  const DomainDef& d_;
  ProblemDef p_;
  std::map<std::string, std::string> types_;
};

void render_typed(std::ostringstream& os, const std::vector<TypedName>& list) {
  // Groups consecutive names of the same type.
  for (std::size_t i = 0; i < list.size();) {
    std::size_t j = i;
    while (j < list.size() && list[j].type == list[i].type) {
      os << (j == i ? "" : " ") << list[j].name;
      ++j;
    }
    os << " - " << list[i].type;
    i = j;
    if (i < list.size()) os << ' ';
  }
}

void render_literal(std::ostringstream& os, const Literal& l) {
  if (!l.positive) os << "(not ";
  os << '(' << l.predicate;
  for (const auto& a : l.args) os << ' ' << a;
  os << ')';
  if (!l.positive) os << ')';
}

}  // namespace

std::string render_formula(const Formula& f) {
  std::ostringstream os;
  switch (f.kind) {
    case Formula::Kind::kAtom:
      os << '(' << f.predicate;
      for (const auto& a : f.args) os << ' ' << a;
      os << ')';
      break;
    case Formula::Kind::kNot:
      os << "(not " << render_formula(f.children.at(0)) << ')';
      break;
    case Formula::Kind::kAnd:
      os << "(and";
      for (const auto& c : f.children) os << ' ' << render_formula(c);
      os << ')';
      break;
    case Formula::Kind::kExists:
      os << "(exists (" << f.variables.at(0).name << " - " << f.variables.at(0).type << ") "
         << render_formula(f.children.at(0)) << ')';
      break;
  }
  return os.str();
}

DomainDef parse_domain(std::string_view text) {
  Reader reader(text);
  Node root = reader.read_document();
  return DomainBuilder().build(root);
}

ProblemDef parse_problem(std::string_view text, const DomainDef& domain) {
  Reader reader(text);
  Node root = reader.read_document();
  return ProblemBuilder(domain).build(root);
}

std::string render_domain(const DomainDef& d) {
  std::ostringstream os;
  os << "(define (domain " << d.name << ")\n";
  if (!d.requirements.empty()) {
    os << "  (:requirements";
    for (const auto& r : d.requirements) os << ' ' << r;
    os << ")\n";
  }
  if (!d.types.empty()) {
    os << "  (:types ";
    render_typed(os, d.types);
    os << ")\n";
  }
  if (!d.constants.empty()) {
    os << "  (:constants ";
    render_typed(os, d.constants);
    os << ")\n";
  }
  os << "  (:predicates\n";
  for (const auto& p : d.predicates) {
    os << "    (" << p.name;
    if (!p.parameters.empty()) {
      os << ' ';
      render_typed(os, p.parameters);
    }
    os << ")\n";
  }
  os << "  )\n";
  for (const auto& a : d.actions) {
    os << "  (:action " << a.name << "\n    :parameters (";
    render_typed(os, a.parameters);
    os << ")\n    :precondition " << render_formula(a.precondition) << "\n    :effect (and";
    for (const auto& clause : a.effects) {
      if (clause.condition) {
        os << "\n      (when " << render_formula(*clause.condition) << " (and";
        for (const auto& l : clause.literals) {
          os << ' ';
          render_literal(os, l);
        }
        os << "))";
      } else {
        for (const auto& l : clause.literals) {
          os << "\n      ";
          render_literal(os, l);
        }
      }
    }
    os << ")\n  )\n";
  }
  os << ")\n";
  return os.str();
}

std::string render_problem(const ProblemDef& p) {
  std::ostringstream os;
  os << "(define (problem " << p.name << ")\n";
  os << "  (:domain " << p.domain_name << ")\n";
  os << "  (:objects ";
  render_typed(os, p.objects);
  os << ")\n  (:init\n";
  for (const auto& a : p.init) {
    os << "    (" << a.predicate;
    for (const auto& arg : a.args) os << ' ' << arg;
    os << ")\n";
  }
  os << "  )\n  (:goal (and";
  for (const auto& l : p.goal) {
    os << ' ';
    render_literal(os, l);
  }
  os << "))\n)\n";
  return os.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dqp::pddl
