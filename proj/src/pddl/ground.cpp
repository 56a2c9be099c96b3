#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "dqp/pddl/task.hpp"

namespace dqp::pddl {

std::string GroundAction::label() const {
  std::string s = "(" + name;
  for (const auto& a : args) s += " " + a;
  return s + ")";
}

int GroundTask::find_atom(const GroundAtom& a) const {
  auto it = std::lower_bound(atoms.begin(), atoms.end(), a);
  if (it == atoms.end() || *it != a) return -1;
  return static_cast<int>(it - atoms.begin());
}

std::string GroundTask::atom_name(int index) const {
  const GroundAtom& a = atoms.at(static_cast<std::size_t>(index));
  std::string s = "(" + a.predicate;
  for (const auto& arg : a.args) s += " " + arg;
  return s + ")";
}

int GroundTask::complement_of(int index) const {
  GroundAtom a = atoms.at(static_cast<std::size_t>(index));
  const std::string prefix = kComplementPrefix;
  if (a.predicate.rfind(prefix, 0) == 0) {
    a.predicate = a.predicate.substr(prefix.size());
  } else {
    a.predicate = prefix + a.predicate;
  }
  return find_atom(a);
}

namespace {

struct Term {
  bool var = false;
  int index = 0;  // parameter index when var, object id otherwise
};

struct Lit {
  bool positive = true;
  int pred = 0;
  std::vector<Term> terms;
};

struct CondEffect {
  std::vector<Lit> condition;
  std::vector<Lit> effects;
};

struct Variant {
  const ActionSchema* schema = nullptr;
  std::vector<std::vector<char>> allowed;  // allowed[param][object]
  std::vector<Lit> pre;
  std::vector<CondEffect> effects;
  std::vector<int> join_order;  // indices of positive literals of `pre`
  std::vector<int> free_params;
};

struct VecHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (int x : v) {
      h ^= static_cast<std::uint32_t>(x);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

// Facts are stored as [pred, arg0, arg1, ...].
class FactStore {
 public:
  explicit FactStore(std::size_t num_preds) : by_pred_(num_preds) {}

  int find(const std::vector<int>& key) const {
    auto it = ids_.find(key);
    return it == ids_.end() ? -1 : it->second;
  }

  // Returns true when the fact is new.
  bool add(const std::vector<int>& key) {
    auto [it, inserted] = ids_.emplace(key, static_cast<int>(facts_.size()));
    if (!inserted) return false;
    const int id = it->second;
    facts_.push_back(key);
    by_pred_[static_cast<std::size_t>(key[0])].push_back(id);
    for (std::size_t pos = 1; pos < key.size(); ++pos) {
      by_arg_[arg_key(key[0], static_cast<int>(pos - 1), key[pos])].push_back(id);
    }
    return true;
  }

  const std::vector<int>& fact(int id) const { return facts_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return facts_.size(); }
  const std::vector<int>& with_pred(int pred) const { return by_pred_[static_cast<std::size_t>(pred)]; }
  const std::vector<int>* with_arg(int pred, int pos, int obj) const {
    auto it = by_arg_.find(arg_key(pred, pos, obj));
    return it == by_arg_.end() ? &empty_ : &it->second;
  }

 private:
  static std::uint64_t arg_key(int pred, int pos, int obj) {
    return (static_cast<std::uint64_t>(pred) << 40) | (static_cast<std::uint64_t>(pos) << 32) |
           static_cast<std::uint32_t>(obj);
  }

  std::unordered_map<std::vector<int>, int, VecHash> ids_;
  std::vector<std::vector<int>> facts_;
  std::vector<std::vector<int>> by_pred_;
  std::unordered_map<std::uint64_t, std::vector<int>> by_arg_;
  std::vector<int> empty_;
};

constexpr std::size_t kMaxDnf = 100000;

class Grounder {
 public:
  Grounder(const DomainDef& d, const ProblemDef& p, const GroundOptions& o)
      : d_(d), p_(p), opt_(o), store_(d.predicates.size()) {}

  GroundTask run() {
    index_symbols();
    build_variants();
    load_init();
    reach();
    instantiate();
    return finish();
  }

 private:
  // ---- symbols -------------------------------------------------------------

  void index_symbols() {
    for (std::size_t i = 0; i < d_.predicates.size(); ++i) {
      pred_id_[d_.predicates[i].name] = static_cast<int>(i);
    }
    std::map<std::string, std::string> objs;
    for (const auto& c : d_.constants) objs[c.name] = c.type;
    for (const auto& o : p_.objects) objs[o.name] = o.type;
    for (const auto& [name, type] : objs) {
      obj_id_[name] = static_cast<int>(obj_names_.size());
      obj_names_.push_back(name);
      obj_types_.push_back(type);
    }
    fluent_.assign(d_.predicates.size(), 0);
    for (const auto& a : d_.actions) {
      for (const auto& clause : a.effects) {
        for (const auto& lit : clause.literals) fluent_[static_cast<std::size_t>(pred(lit.predicate))] = 1;
      }
    }
  }

  int pred(const std::string& name) const {
    auto it = pred_id_.find(name);
    if (it == pred_id_.end()) throw GroundingError("unknown predicate " + name);
    return it->second;
  }

  int object(const std::string& name) const {
    auto it = obj_id_.find(name);
    if (it == obj_id_.end()) throw GroundingError("unknown object " + name);
    return it->second;
  }

  std::vector<int> objects_of(const std::string& type) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < obj_names_.size(); ++i) {
      if (d_.is_subtype(obj_types_[i], type)) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  // ---- normalisation ---------------------------------------------------------

  using Env = std::map<std::string, Term>;
  using Dnf = std::vector<std::vector<Lit>>;

  Lit make_lit(bool positive, const std::string& predicate, const std::vector<std::string>& args,
               const Env& env) const {
    Lit l{positive, pred(predicate), {}};
    for (const auto& a : args) {
      if (a[0] == '?') {
        auto it = env.find(a);
        if (it == env.end()) throw GroundingError("free variable " + a);
        l.terms.push_back(it->second);
      } else {
        l.terms.push_back({false, object(a)});
      }
    }
    return l;
  }

  static Dnf cross(const Dnf& a, const Dnf& b) {
    Dnf out;
    for (const auto& x : a) {
      for (const auto& y : b) {
        auto c = x;
        c.insert(c.end(), y.begin(), y.end());
        out.push_back(std::move(c));
        if (out.size() > kMaxDnf) throw GroundingError("formula expansion exceeds budget");
      }
    }
    return out;
  }

  Dnf dnf(const Formula& f, bool negated, const Env& env) const {
    switch (f.kind) {
      case Formula::Kind::kAtom:
        return {{make_lit(!negated, f.predicate, f.args, env)}};
      case Formula::Kind::kNot:
        return dnf(f.children.at(0), !negated, env);
      case Formula::Kind::kAnd: {
        if (!negated) {
          Dnf acc{{}};
          for (const auto& c : f.children) acc = cross(acc, dnf(c, false, env));
          return acc;
        }
        Dnf acc;
        for (const auto& c : f.children) {
          auto part = dnf(c, true, env);
          acc.insert(acc.end(), part.begin(), part.end());
        }
        return acc;
      }
      case Formula::Kind::kExists: {
        const TypedName& v = f.variables.at(0);
        Dnf acc = negated ? Dnf{{}} : Dnf{};
        for (int o : objects_of(v.type)) {
          Env inner = env;
          inner[v.name] = {false, o};
          auto part = dnf(f.children.at(0), negated, inner);
          if (negated) {
            acc = cross(acc, part);
          } else {
            acc.insert(acc.end(), part.begin(), part.end());
          }
        }
        return acc;
      }
    }
    return {};
  }

  void build_variants() {
    for (const auto& a : d_.actions) {
      Env env;
      std::vector<std::vector<char>> allowed;
      for (std::size_t i = 0; i < a.parameters.size(); ++i) {
        env[a.parameters[i].name] = {true, static_cast<int>(i)};
        std::vector<char> mask(obj_names_.size(), 0);
        for (int o : objects_of(a.parameters[i].type)) mask[static_cast<std::size_t>(o)] = 1;
        allowed.push_back(std::move(mask));
      }
      std::vector<CondEffect> effects;
      for (const auto& clause : a.effects) {
        std::vector<Lit> lits;
        for (const auto& l : clause.literals) lits.push_back(make_lit(l.positive, l.predicate, l.args, env));
        if (!clause.condition) {
          effects.push_back({{}, lits});
          continue;
        }
        for (auto& conj : dnf(*clause.condition, false, env)) effects.push_back({std::move(conj), lits});
      }
      for (auto& conj : dnf(a.precondition, false, env)) {
        Variant v;
        v.schema = &a;
        v.allowed = allowed;
        v.pre = std::move(conj);
        v.effects = effects;
        plan_join(v);
        variants_.push_back(std::move(v));
      }
    }
  }

  void plan_join(Variant& v) const {
    const std::size_t n = v.schema->parameters.size();
    std::vector<char> bound(n, 0);
    std::vector<char> used(v.pre.size(), 0);
    while (true) {
      int best = -1;
      int best_bound = -1;
      int best_unbound = 0;
      bool best_static = false;
      for (std::size_t i = 0; i < v.pre.size(); ++i) {
        const Lit& l = v.pre[i];
        if (used[i] || !l.positive) continue;
        int nb = 0;
        int nu = 0;
        for (const Term& t : l.terms) {
          if (!t.var || bound[static_cast<std::size_t>(t.index)]) {
            ++nb;
          } else {
            ++nu;
          }
        }
        const bool is_static = !fluent_[static_cast<std::size_t>(l.pred)];
        const bool better = best < 0 || nb > best_bound ||
                            (nb == best_bound && nu < best_unbound) ||
                            (nb == best_bound && nu == best_unbound && is_static && !best_static);
        if (better) {
          best = static_cast<int>(i);
          best_bound = nb;
          best_unbound = nu;
          best_static = is_static;
        }
      }
      if (best < 0) break;
      used[static_cast<std::size_t>(best)] = 1;
      v.join_order.push_back(best);
      for (const Term& t : v.pre[static_cast<std::size_t>(best)].terms) {
        if (t.var) bound[static_cast<std::size_t>(t.index)] = 1;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!bound[i]) v.free_params.push_back(static_cast<int>(i));
    }
  }

  // ---- facts -----------------------------------------------------------------

  void load_init() {
    for (const auto& a : p_.init) {
      std::vector<int> key{pred(a.predicate)};
      for (const auto& arg : a.args) key.push_back(object(arg));
      store_.add(key);
      init_.insert(key);
    }
  }

  std::vector<int> ground_key(const Lit& l, const std::vector<int>& binding) const {
    std::vector<int> key;
    key.reserve(l.terms.size() + 1);
    key.push_back(l.pred);
    for (const Term& t : l.terms) key.push_back(t.var ? binding[static_cast<std::size_t>(t.index)] : t.index);
    return key;
  }

  bool is_static(const Lit& l) const { return !fluent_[static_cast<std::size_t>(l.pred)]; }

  // Static negative literals can be decided as soon as every term is bound.
  bool static_negatives_hold(const Variant& v, const std::vector<int>& binding) const {
    for (const Lit& l : v.pre) {
      if (!l.positive && is_static(l) && init_.count(ground_key(l, binding))) return false;
    }
    return true;
  }

  void enumerate(const Variant& v, const std::function<void(const std::vector<int>&)>& emit) {
    std::vector<int> binding(v.schema->parameters.size(), -1);
    join(v, 0, binding, emit);
  }

  void join(const Variant& v, std::size_t depth, std::vector<int>& binding,
            const std::function<void(const std::vector<int>&)>& emit) {
    if (depth == v.join_order.size()) {
      bind_free(v, 0, binding, emit);
      return;
    }
    const Lit& l = v.pre[static_cast<std::size_t>(v.join_order[depth])];
    const std::vector<int>* candidates = &store_.with_pred(l.pred);
    for (std::size_t pos = 0; pos < l.terms.size(); ++pos) {
      const Term& t = l.terms[pos];
      const int val = t.var ? binding[static_cast<std::size_t>(t.index)] : t.index;
      if (val >= 0) {
        candidates = store_.with_arg(l.pred, static_cast<int>(pos), val);
        break;
      }
    }
    std::vector<int> newly;
    for (std::size_t i = 0; i < candidates->size(); ++i) {
      const int fid = (*candidates)[i];
      bool ok = true;
      newly.clear();
      {
        const std::vector<int>& f = store_.fact(fid);
        for (std::size_t pos = 0; pos < l.terms.size() && ok; ++pos) {
          const Term& t = l.terms[pos];
          const int obj = f[pos + 1];
          if (!t.var) {
            ok = t.index == obj;
          } else {
            int& slot = binding[static_cast<std::size_t>(t.index)];
            if (slot >= 0) {
              ok = slot == obj;
            } else if (!v.allowed[static_cast<std::size_t>(t.index)][static_cast<std::size_t>(obj)]) {
              ok = false;
            } else {
              slot = obj;
              newly.push_back(t.index);
            }
          }
        }
      }
      if (ok) join(v, depth + 1, binding, emit);
      for (int idx : newly) binding[static_cast<std::size_t>(idx)] = -1;
    }
  }

  void bind_free(const Variant& v, std::size_t k, std::vector<int>& binding,
                 const std::function<void(const std::vector<int>&)>& emit) {
    if (k == v.free_params.size()) {
      if (static_negatives_hold(v, binding)) emit(binding);
      return;
    }
    const int param = v.free_params[k];
    const auto& mask = v.allowed[static_cast<std::size_t>(param)];
    for (std::size_t o = 0; o < mask.size(); ++o) {
      if (!mask[o]) continue;
      binding[static_cast<std::size_t>(param)] = static_cast<int>(o);
      bind_free(v, k + 1, binding, emit);
    }
    binding[static_cast<std::size_t>(param)] = -1;
  }

  // Relaxed truth of a condition: negative fluent literals are ignored.
  bool relaxed_holds(const std::vector<Lit>& cond, const std::vector<int>& binding) const {
    for (const Lit& l : cond) {
      const auto key = ground_key(l, binding);
      if (is_static(l)) {
        if (l.positive != (init_.count(key) > 0)) return false;
      } else if (l.positive && store_.find(key) < 0) {
        return false;
      }
    }
    return true;
  }

  void reach() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const Variant& v : variants_) {
        enumerate(v, [&](const std::vector<int>& b) {
          for (const CondEffect& e : v.effects) {
            if (!relaxed_holds(e.condition, b)) continue;
            for (const Lit& l : e.effects) {
              if (l.positive && store_.add(ground_key(l, b))) {
                changed = true;
                if (store_.size() > opt_.max_atoms) {
                  throw GroundingError("grounding exceeds atom budget of " +
                                       std::to_string(opt_.max_atoms));
                }
              }
            }
          }
        });
      }
    }
  }

  // ---- instantiation -------------------------------------------------------

  // Atom references before final indexing: fact id * 2 (+1 for the complement).
  struct RawEffect {
    std::vector<int> condition;
    std::vector<int> add;
    std::vector<int> del;
  };
  struct RawAction {
    const ActionSchema* schema;
    std::vector<int> binding;
    std::vector<int> pre;
    std::vector<RawEffect> effects;
  };

  // Returns false when the literal is certainly false; pushes the atom
  // reference when it must be checked at search time.
  bool encode_lit(const Lit& l, const std::vector<int>& binding, std::vector<int>& out) {
    const auto key = ground_key(l, binding);
    if (is_static(l)) return l.positive == (init_.count(key) > 0);
    const int id = store_.find(key);
    if (l.positive) {
      if (id < 0) return false;
      out.push_back(id * 2);
      return true;
    }
    if (id < 0) return true;
    out.push_back(id * 2 + 1);
    negated_.insert(id);
    return true;
  }

  void instantiate() {
    for (const Variant& v : variants_) {
      enumerate(v, [&](const std::vector<int>& b) {
        RawAction a{v.schema, b, {}, {}};
        for (const Lit& l : v.pre) {
          if (!encode_lit(l, b, a.pre)) return;
        }
        for (const CondEffect& e : v.effects) {
          RawEffect re;
          bool live = true;
          for (const Lit& l : e.condition) {
            if (!encode_lit(l, b, re.condition)) {
              live = false;
              break;
            }
          }
          if (!live) continue;
          for (const Lit& l : e.effects) {
            const auto key = ground_key(l, b);
            const int id = store_.find(key);
            if (l.positive) {
              if (id < 0) throw GroundingError("internal: effect atom missed by reachability");
              re.add.push_back(id * 2);
            } else if (id >= 0) {
              re.del.push_back(id * 2);
            }
          }
          if (!re.add.empty() || !re.del.empty()) a.effects.push_back(std::move(re));
        }
        raw_.push_back(std::move(a));
        if (raw_.size() > opt_.max_actions) {
          throw GroundingError("grounding exceeds action budget of " + std::to_string(opt_.max_actions));
        }
      });
    }
  }

  GroundAtom atom_of(const std::vector<int>& key, bool complement) const {
    GroundAtom a;
    a.predicate = d_.predicates[static_cast<std::size_t>(key[0])].name;
    if (complement) a.predicate = std::string(kComplementPrefix) + a.predicate;
    for (std::size_t i = 1; i < key.size(); ++i) a.args.push_back(obj_names_[static_cast<std::size_t>(key[i])]);
    return a;
  }

  GroundTask finish() {
    // Goal atoms are kept even when unreachable so the search can report it.
    std::vector<int> goal_refs;
    for (const auto& g : p_.goal) {
      std::vector<int> key{pred(g.predicate)};
      for (const auto& arg : g.args) key.push_back(object(arg));
      if (!fluent_[static_cast<std::size_t>(key[0])]) {
        const bool holds = init_.count(key) > 0;
        if (holds == g.positive) continue;
      }
      int id = store_.find(key);
      if (id < 0) {
        if (!g.positive) continue;
        store_.add(key);
        id = store_.find(key);
      }
      goal_refs.push_back(id * 2 + (g.positive ? 0 : 1));
      if (!g.positive) negated_.insert(id);
    }

    // Universe: every stored fluent fact plus the complements in use.
    std::vector<std::pair<GroundAtom, int>> named;
    for (std::size_t id = 0; id < store_.size(); ++id) {
      const auto& key = store_.fact(static_cast<int>(id));
      if (!fluent_[static_cast<std::size_t>(key[0])]) continue;
      named.emplace_back(atom_of(key, false), static_cast<int>(id) * 2);
      if (negated_.count(static_cast<int>(id))) {
        named.emplace_back(atom_of(key, true), static_cast<int>(id) * 2 + 1);
      }
    }
    std::sort(named.begin(), named.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    GroundTask task;
    std::unordered_map<int, int> index;
    for (std::size_t i = 0; i < named.size(); ++i) {
      task.atoms.push_back(named[i].first);
      index[named[i].second] = static_cast<int>(i);
    }
    auto map_ref = [&](int ref) { return index.at(ref); };
    auto has_complement = [&](int ref) { return negated_.count(ref / 2) > 0; };
    auto sorted = [](std::vector<int> v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      return v;
    };

    for (std::size_t i = 0; i < named.size(); ++i) {
      const int ref = named[i].second;
      const bool in_init = init_.count(store_.fact(ref / 2)) > 0;
      if ((ref % 2 == 0) == in_init) task.init.push_back(static_cast<int>(i));
    }

    for (const RawAction& r : raw_) {
      GroundAction a;
      a.name = r.schema->name;
      for (int o : r.binding) a.args.push_back(obj_names_[static_cast<std::size_t>(o)]);
      std::vector<int> pre;
      for (int ref : r.pre) pre.push_back(map_ref(ref));
      a.pre = sorted(pre);
      for (const RawEffect& re : r.effects) {
        GroundEffect e;
        for (int ref : re.condition) e.condition.push_back(map_ref(ref));
        for (int ref : re.add) {
          e.add.push_back(map_ref(ref));
          if (has_complement(ref)) e.del.push_back(map_ref(ref + 1));
        }
        for (int ref : re.del) {
          e.del.push_back(map_ref(ref));
          if (has_complement(ref)) e.add.push_back(map_ref(ref + 1));
        }
        e.condition = sorted(e.condition);
        e.add = sorted(e.add);
        e.del = sorted(e.del);
        a.effects.push_back(std::move(e));
      }
      std::sort(a.effects.begin(), a.effects.end(), [](const GroundEffect& x, const GroundEffect& y) {
        return std::tie(x.condition, x.add, x.del) < std::tie(y.condition, y.add, y.del);
      });
      task.actions.push_back(std::move(a));
    }
    std::sort(task.actions.begin(), task.actions.end(), [](const GroundAction& x, const GroundAction& y) {
      if (x.name != y.name) return x.name < y.name;
      if (x.args != y.args) return x.args < y.args;
      if (x.pre != y.pre) return x.pre < y.pre;
      return std::lexicographical_compare(
          x.effects.begin(), x.effects.end(), y.effects.begin(), y.effects.end(),
          [](const GroundEffect& p, const GroundEffect& q) {
            return std::tie(p.condition, p.add, p.del) < std::tie(q.condition, q.add, q.del);
          });
    });
    task.actions.erase(std::unique(task.actions.begin(), task.actions.end()), task.actions.end());

    std::vector<int> goal;
    for (int ref : goal_refs) goal.push_back(map_ref(ref));
    task.goal = sorted(goal);
    return task;
  }

  const DomainDef& d_;
  const ProblemDef& p_;
  GroundOptions opt_;
  FactStore store_;
  std::unordered_map<std::string, int> pred_id_;
  std::unordered_map<std::string, int> obj_id_;
  std::vector<std::string> obj_names_;
  std::vector<std::string> obj_types_;
  std::vector<char> fluent_;
  std::vector<Variant> variants_;
  std::unordered_set<std::vector<int>, VecHash> init_;
  std::set<int> negated_;
  std::vector<RawAction> raw_;
};

}  // namespace

GroundTask ground(const DomainDef& domain, const ProblemDef& problem, const GroundOptions& options) {
  return Grounder(domain, problem, options).run();
}

}  // namespace dqp::pddl
