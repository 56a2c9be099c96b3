#include <algorithm>
#include <chrono>
#include <deque>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "dqp/planner.hpp"

namespace dqp::planner {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kOpt: return "opt";
    case Strategy::kWbfs: return "wbfs";
    case Strategy::kEhc: return "ehc";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "opt") return Strategy::kOpt;
  if (name == "wbfs") return Strategy::kWbfs;
  if (name == "ehc") return Strategy::kEhc;
  throw std::invalid_argument("unknown strategy " + name);
}

std::string status_name(Status s) {
  switch (s) {
    case Status::kSolved: return "solved";
    case Status::kUnsolvable: return "unsolvable";
    case Status::kTimeout: return "timeout";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

struct Eff {
  std::vector<int> cond;
  std::vector<int> add;
  std::vector<int> del;
};

struct Act {
  int original = 0;
  std::vector<int> pre;
  std::vector<Eff> effects;
};

struct Op {
  int action = 0;  // compact action index (order matches the original)
  std::vector<int> pre;
  std::vector<int> add;
};

void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Task restricted to atoms that can matter for the goal, with atoms no action
// ever changes folded into constants.
class Compiled {
 public:
  explicit Compiled(const pddl::GroundTask& task) {
    const std::size_t n = task.atoms.size();
    std::vector<char> in_init(n, 0);
    for (int a : task.init) in_init[static_cast<std::size_t>(a)] = 1;
    std::vector<char> changed(n, 0);
    for (const auto& a : task.actions) {
      for (const auto& e : a.effects) {
        for (int x : e.add) changed[static_cast<std::size_t>(x)] = 1;
        for (int x : e.del) changed[static_cast<std::size_t>(x)] = 1;
      }
    }
    auto constant_false = [&](int x) { return !changed[static_cast<std::size_t>(x)] && !in_init[static_cast<std::size_t>(x)]; };
    auto constant_true = [&](int x) { return !changed[static_cast<std::size_t>(x)] && in_init[static_cast<std::size_t>(x)]; };

    for (int g : task.goal) {
      if (constant_false(g)) goal_impossible_ = true;
    }

    std::vector<Act> acts;
    for (std::size_t i = 0; i < task.actions.size(); ++i) {
      const auto& ga = task.actions[i];
      if (std::any_of(ga.pre.begin(), ga.pre.end(), constant_false)) continue;
      Act a;
      a.original = static_cast<int>(i);
      for (int p : ga.pre) {
        if (!constant_true(p)) a.pre.push_back(p);
      }
      for (const auto& ge : ga.effects) {
        if (std::any_of(ge.condition.begin(), ge.condition.end(), constant_false)) continue;
        Eff e;
        for (int c : ge.condition) {
          if (!constant_true(c)) e.cond.push_back(c);
        }
        e.add = ge.add;
        e.del = ge.del;
        a.effects.push_back(std::move(e));
      }
      acts.push_back(std::move(a));
    }

    // Relevance fixpoint: goal, preconditions, and conditions of effects that
    // touch relevant atoms.
    std::vector<char> rel(n, 0);
    for (int g : task.goal) rel[static_cast<std::size_t>(g)] = 1;
    for (const auto& a : acts) {
      for (int p : a.pre) rel[static_cast<std::size_t>(p)] = 1;
    }
    bool grow = true;
    while (grow) {
      grow = false;
      for (const auto& a : acts) {
        for (const auto& e : a.effects) {
          const bool touches =
              std::any_of(e.add.begin(), e.add.end(), [&](int x) { return rel[static_cast<std::size_t>(x)] != 0; }) ||
              std::any_of(e.del.begin(), e.del.end(), [&](int x) { return rel[static_cast<std::size_t>(x)] != 0; });
          if (!touches) continue;
          for (int c : e.cond) {
            if (!rel[static_cast<std::size_t>(c)]) {
              rel[static_cast<std::size_t>(c)] = 1;
              grow = true;
            }
          }
        }
      }
    }
    std::vector<int> compact(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (rel[i] && !constant_true(static_cast<int>(i)) && !constant_false(static_cast<int>(i))) {
        compact[i] = static_cast<int>(atom_of_.size());
        atom_of_.push_back(static_cast<int>(i));
      }
    }
    auto remap = [&](const std::vector<int>& v) {
      std::vector<int> out;
      for (int x : v) {
        if (compact[static_cast<std::size_t>(x)] >= 0) out.push_back(compact[static_cast<std::size_t>(x)]);
      }
      sort_unique(out);
      return out;
    };
    for (auto& a : acts) {
      Act c;
      c.original = a.original;
      c.pre = remap(a.pre);
      for (auto& e : a.effects) {
        Eff ce{remap(e.cond), remap(e.add), remap(e.del)};
        if (!ce.add.empty() || !ce.del.empty()) c.effects.push_back(std::move(ce));
      }
      if (!c.effects.empty()) actions_.push_back(std::move(c));
    }
    for (int a : task.init) {
      if (compact[static_cast<std::size_t>(a)] >= 0) init_.push_back(compact[static_cast<std::size_t>(a)]);
    }
    sort_unique(init_);
    for (int g : task.goal) {
      if (compact[static_cast<std::size_t>(g)] >= 0) goal_.push_back(compact[static_cast<std::size_t>(g)]);
    }
    sort_unique(goal_);

    const std::size_t m = atom_of_.size();
    ops_of_atom_.resize(m);
    for (std::size_t ai = 0; ai < actions_.size(); ++ai) {
      const Act& a = actions_[ai];
      for (const Eff& e : a.effects) {
        if (e.add.empty()) continue;
        Op op;
        op.action = static_cast<int>(ai);
        op.pre = a.pre;
        op.pre.insert(op.pre.end(), e.cond.begin(), e.cond.end());
        sort_unique(op.pre);
        op.add = e.add;
        const int id = static_cast<int>(ops_.size());
        if (op.pre.empty()) empty_pre_ops_.push_back(id);
        for (int p : op.pre) ops_of_atom_[static_cast<std::size_t>(p)].push_back(id);
        ops_.push_back(std::move(op));
      }
    }

    // Successor generator: each action watches its least shared precondition.
    std::vector<int> uses(m, 0);
    for (const Act& a : actions_) {
      for (int p : a.pre) ++uses[static_cast<std::size_t>(p)];
    }
    watch_.resize(m);
    for (std::size_t ai = 0; ai < actions_.size(); ++ai) {
      const Act& a = actions_[ai];
      if (a.pre.empty()) {
        always_.push_back(static_cast<int>(ai));
        continue;
      }
      int best = a.pre[0];
      for (int p : a.pre) {
        if (uses[static_cast<std::size_t>(p)] < uses[static_cast<std::size_t>(best)]) best = p;
      }
      watch_[static_cast<std::size_t>(best)].push_back(static_cast<int>(ai));
    }
    words_ = std::max<std::size_t>(1, (m + 63) / 64);
  }

  std::size_t num_atoms() const { return atom_of_.size(); }
  std::size_t words() const { return words_; }
  const std::vector<Act>& actions() const { return actions_; }
  const std::vector<Op>& ops() const { return ops_; }
  const std::vector<int>& ops_of_atom(int a) const { return ops_of_atom_[static_cast<std::size_t>(a)]; }
  const std::vector<int>& empty_pre_ops() const { return empty_pre_ops_; }
  const std::vector<int>& init() const { return init_; }
  const std::vector<int>& goal() const { return goal_; }
  bool goal_impossible() const { return goal_impossible_; }
  const std::vector<int>& watch(int a) const { return watch_[static_cast<std::size_t>(a)]; }
  const std::vector<int>& always() const { return always_; }

  // Compact state from original atom indices.
  std::vector<uint64_t> pack(const std::vector<int>& original_atoms) const {
    std::vector<uint64_t> bits(words_, 0);
    for (int a : original_atoms) {
      auto it = std::lower_bound(atom_of_.begin(), atom_of_.end(), a);
      if (it != atom_of_.end() && *it == a) {
        const auto c = static_cast<std::size_t>(it - atom_of_.begin());
        bits[c / 64] |= uint64_t{1} << (c % 64);
      }
    }
    return bits;
  }

  std::vector<uint64_t> pack_compact(const std::vector<int>& atoms) const {
    std::vector<uint64_t> bits(words_, 0);
    for (int c : atoms) bits[static_cast<std::size_t>(c) / 64] |= uint64_t{1} << (c % 64);
    return bits;
  }

 private:
  std::vector<int> atom_of_;
  std::vector<Act> actions_;
  std::vector<Op> ops_;
  std::vector<std::vector<int>> ops_of_atom_;
  std::vector<int> empty_pre_ops_;
  std::vector<int> init_;
  std::vector<int> goal_;
  bool goal_impossible_ = false;
  std::vector<std::vector<int>> watch_;
  std::vector<int> always_;
  std::size_t words_ = 1;
};

inline bool test(const uint64_t* bits, int a) {
  return (bits[static_cast<std::size_t>(a) / 64] >> (a % 64)) & 1U;
}

inline void set_bit(uint64_t* bits, int a) { bits[static_cast<std::size_t>(a) / 64] |= uint64_t{1} << (a % 64); }
inline void clear_bit(uint64_t* bits, int a) { bits[static_cast<std::size_t>(a) / 64] &= ~(uint64_t{1} << (a % 64)); }

// Unit-cost relaxed exploration shared by h_max and h_ff.
class Relaxation {
 public:
  explicit Relaxation(const Compiled& c)
      : c_(c),
        level_(c.num_atoms(), -1),
        supporter_(c.num_atoms(), -1),
        counter_(c.ops().size(), 0),
        marked_atom_(c.num_atoms(), 0),
        marked_action_(c.actions().size(), 0) {}

  int h_max(const uint64_t* state) {
    if (!explore(state)) return kInfinity;
    int h = 0;
    for (int g : c_.goal()) h = std::max(h, level_[static_cast<std::size_t>(g)]);
    return h;
  }

  int h_ff(const uint64_t* state) {
    if (!explore(state)) return kInfinity;
    ++epoch_;
    int h = 0;
    stack_.clear();
    for (int g : c_.goal()) {
      if (level_[static_cast<std::size_t>(g)] > 0) stack_.push_back(g);
    }
    while (!stack_.empty()) {
      const int b = stack_.back();
      stack_.pop_back();
      if (marked_atom_[static_cast<std::size_t>(b)] == epoch_) continue;
      marked_atom_[static_cast<std::size_t>(b)] = epoch_;
      const Op& op = c_.ops()[static_cast<std::size_t>(supporter_[static_cast<std::size_t>(b)])];
      if (marked_action_[static_cast<std::size_t>(op.action)] != epoch_) {
        marked_action_[static_cast<std::size_t>(op.action)] = epoch_;
        ++h;
      }
      for (int p : op.pre) {
        if (level_[static_cast<std::size_t>(p)] > 0 && marked_atom_[static_cast<std::size_t>(p)] != epoch_) {
          stack_.push_back(p);
        }
      }
    }
    return h;
  }

 private:
  // Returns false when some goal atom stays unreached.
  bool explore(const uint64_t* state) {
    std::fill(level_.begin(), level_.end(), -1);
    const auto& ops = c_.ops();
    for (std::size_t i = 0; i < ops.size(); ++i) counter_[i] = static_cast<int>(ops[i].pre.size());
    queue_.clear();
    for (std::size_t a = 0; a < c_.num_atoms(); ++a) {
      if (test(state, static_cast<int>(a))) {
        level_[a] = 0;
        queue_.push_back(static_cast<int>(a));
      }
    }
    int goals_left = 0;
    for (int g : c_.goal()) {
      if (level_[static_cast<std::size_t>(g)] < 0) ++goals_left;
    }
    if (goals_left == 0) return true;
    for (int op : c_.empty_pre_ops()) fire(op, 0, goals_left);
    int max_goal = -1;
    std::size_t head = 0;
    while (head < queue_.size()) {
      const int a = queue_[head++];
      const int lvl = level_[static_cast<std::size_t>(a)];
      if (goals_left == 0) {
        if (max_goal < 0) {
          for (int g : c_.goal()) max_goal = std::max(max_goal, level_[static_cast<std::size_t>(g)]);
        }
        if (lvl >= max_goal) break;
      }
      for (int op : c_.ops_of_atom(a)) {
        if (--counter_[static_cast<std::size_t>(op)] == 0) fire(op, lvl, goals_left);
      }
    }
    return goals_left == 0;
  }

  void fire(int op_id, int lvl, int& goals_left) {
    const Op& op = c_.ops()[static_cast<std::size_t>(op_id)];
    for (int b : op.add) {
      int& l = level_[static_cast<std::size_t>(b)];
      if (l < 0) {
        l = lvl + 1;
        supporter_[static_cast<std::size_t>(b)] = op_id;
        queue_.push_back(b);
        if (std::binary_search(c_.goal().begin(), c_.goal().end(), b)) --goals_left;
      } else if (l == lvl + 1) {
        int& s = supporter_[static_cast<std::size_t>(b)];
        if (op.action < c_.ops()[static_cast<std::size_t>(s)].action) s = op_id;
      }
    }
  }

  const Compiled& c_;
  std::vector<int> level_;
  std::vector<int> supporter_;
  std::vector<int> counter_;
  std::vector<int> queue_;
  std::vector<int> stack_;
  std::vector<int> marked_atom_;
  std::vector<int> marked_action_;
  int epoch_ = 0;
};

// Hash-consed packed states.
class StatePool {
 public:
  explicit StatePool(std::size_t words)
      : words_(words), index_(64, Hash{this}, Eq{this}) {}

  // Returns (id, inserted).
  std::pair<int, bool> insert(const uint64_t* bits) {
    pending_ = bits;
    auto it = index_.find(kPending);
    if (it != index_.end()) return {*it, false};
    const int id = static_cast<int>(size());
    data_.insert(data_.end(), bits, bits + words_);
    index_.insert(id);
    return {id, true};
  }

  const uint64_t* get(int id) const { return data_.data() + static_cast<std::size_t>(id) * words_; }
  std::size_t size() const { return data_.size() / words_; }

 private:
  static constexpr int kPending = -1;

  const uint64_t* bits_of(int id) const { return id == kPending ? pending_ : get(id); }

  struct Hash {
    const StatePool* pool;
    std::size_t operator()(int id) const {
      const uint64_t* b = pool->bits_of(id);
      uint64_t h = 0x9E3779B97F4A7C15ULL;
      for (std::size_t i = 0; i < pool->words_; ++i) {
        h ^= b[i] + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };
  struct Eq {
    const StatePool* pool;
    bool operator()(int a, int b) const {
      return std::equal(pool->bits_of(a), pool->bits_of(a) + pool->words_, pool->bits_of(b));
    }
  };

  std::size_t words_;
  std::vector<uint64_t> data_;
  const uint64_t* pending_ = nullptr;
  std::unordered_set<int, Hash, Eq> index_;
};

class Searcher {
 public:
  Searcher(const pddl::GroundTask& task, const SearchConfig& cfg)
      : task_(task), cfg_(cfg), c_(task), relax_(c_), pool_(c_.words()), scratch_(c_.words()) {}

  PlanOutcome run() {
    start_ = Clock::now();
    PlanOutcome out;
    if (c_.goal_impossible()) {
      out.status = Status::kUnsolvable;
    } else {
      switch (cfg_.strategy) {
        case Strategy::kOpt:
        case Strategy::kWbfs:
          out = best_first();
          break;
        case Strategy::kEhc:
          out = hill_climb();
          break;
      }
    }
    out.elapsed_s = elapsed();
    out.expanded = expanded_;
    out.generated = pool_.size();
    return out;
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }
  bool timed_out() const { return elapsed() > cfg_.timeout_s; }

  bool is_goal(const uint64_t* s) const {
    for (int g : c_.goal()) {
      if (!test(s, g)) return false;
    }
    return true;
  }

  void applicable(const uint64_t* s, std::vector<int>& out) const {
    out.clear();
    auto consider = [&](int ai) {
      const Act& a = c_.actions()[static_cast<std::size_t>(ai)];
      for (int p : a.pre) {
        if (!test(s, p)) return;
      }
      out.push_back(ai);
    };
    for (int ai : c_.always()) consider(ai);
    for (std::size_t w = 0; w < c_.words(); ++w) {
      uint64_t word = s[w];
      while (word) {
        const int bit = __builtin_ctzll(word);
        word &= word - 1;
        for (int ai : c_.watch(static_cast<int>(w * 64) + bit)) consider(ai);
      }
    }
    std::sort(out.begin(), out.end());
  }

  void apply(const uint64_t* s, int ai, uint64_t* out) const {
    std::copy(s, s + c_.words(), out);
    const Act& a = c_.actions()[static_cast<std::size_t>(ai)];
    fired_.clear();
    for (std::size_t ei = 0; ei < a.effects.size(); ++ei) {
      const Eff& e = a.effects[ei];
      if (std::all_of(e.cond.begin(), e.cond.end(), [&](int x) { return test(s, x); })) {
        fired_.push_back(static_cast<int>(ei));
      }
    }
    for (int ei : fired_) {
      for (int x : a.effects[static_cast<std::size_t>(ei)].del) clear_bit(out, x);
    }
    for (int ei : fired_) {
      for (int x : a.effects[static_cast<std::size_t>(ei)].add) set_bit(out, x);
    }
  }

  int heuristic(const uint64_t* s) {
    return cfg_.strategy == Strategy::kOpt ? relax_.h_max(s) : relax_.h_ff(s);
  }

  Plan trace(int node) const {
    Plan p;
    while (nodes_[static_cast<std::size_t>(node)].parent >= 0) {
      p.actions.push_back(c_.actions()[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].action)].original);
      node = nodes_[static_cast<std::size_t>(node)].parent;
    }
    std::reverse(p.actions.begin(), p.actions.end());
    return p;
  }

  struct Node {
    int parent = -1;
    int action = -1;
    int g = 0;
    int h = 0;
  };

  struct Entry {
    long long f;
    int g;
    std::uint64_t seq;
    int node;
  };
  struct Worse {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.f != b.f) return a.f > b.f;
      if (a.g != b.g) return a.g < b.g;
      return a.seq > b.seq;
    }
  };

  long long priority(int g, int h) const {
    const long long w = cfg_.strategy == Strategy::kOpt ? 1 : cfg_.weight;
    return g + w * static_cast<long long>(h);
  }

  int add_node(const uint64_t* bits, int parent, int action, int g, bool& fresh, bool& improved) {
    auto [id, inserted] = pool_.insert(bits);
    fresh = inserted;
    improved = false;
    if (inserted) {
      nodes_.push_back({parent, action, g, 0});
    } else if (g < nodes_[static_cast<std::size_t>(id)].g) {
      nodes_[static_cast<std::size_t>(id)].parent = parent;
      nodes_[static_cast<std::size_t>(id)].action = action;
      nodes_[static_cast<std::size_t>(id)].g = g;
      improved = true;
    }
    return id;
  }

  PlanOutcome best_first() {
    PlanOutcome out;
    std::priority_queue<Entry, std::vector<Entry>, Worse> open;
    std::uint64_t seq = 0;
    const auto init = c_.pack_compact(c_.init());
    bool fresh = false;
    bool improved = false;
    const int root = add_node(init.data(), -1, -1, 0, fresh, improved);
    const int h0 = heuristic(init.data());
    if (h0 == kInfinity) return out;
    nodes_[static_cast<std::size_t>(root)].h = h0;
    open.push({priority(0, h0), 0, seq++, root});
    std::vector<int> succ;
    while (!open.empty()) {
      const Entry e = open.top();
      open.pop();
      const Node n = nodes_[static_cast<std::size_t>(e.node)];
      if (e.g != n.g) continue;
      if (timed_out()) {
        out.status = Status::kTimeout;
        return out;
      }
      if (is_goal(pool_.get(e.node))) {
        out.status = Status::kSolved;
        out.plan = trace(e.node);
        return out;
      }
      ++expanded_;
      applicable(pool_.get(e.node), succ);
      for (int ai : succ) {
        apply(pool_.get(e.node), ai, scratch_.data());
        const int g = n.g + 1;
        const int id = add_node(scratch_.data(), e.node, ai, g, fresh, improved);
        if (fresh) {
          const int h = heuristic(scratch_.data());
          nodes_[static_cast<std::size_t>(id)].h = h;
          if (h == kInfinity) continue;
          open.push({priority(g, h), g, seq++, id});
        } else if (improved) {
          const int h = nodes_[static_cast<std::size_t>(id)].h;
          if (h == kInfinity) continue;
          open.push({priority(g, h), g, seq++, id});
        }
      }
    }
    return out;
  }

  PlanOutcome hill_climb() {
    PlanOutcome out;
    const auto init = c_.pack_compact(c_.init());
    bool fresh = false;
    bool improved = false;
    int current = add_node(init.data(), -1, -1, 0, fresh, improved);
    int h_cur = heuristic(init.data());
    if (h_cur == kInfinity) return out;
    nodes_[static_cast<std::size_t>(current)].h = h_cur;
    std::vector<int> plan;
    std::vector<int> succ;
    while (!is_goal(pool_.get(current))) {
      // Breadth-first search for a strictly better state.
      std::unordered_map<int, std::pair<int, int>> parent;  // node -> (parent, action)
      parent[current] = {-1, -1};
      std::deque<int> frontier{current};
      int better = -1;
      while (!frontier.empty() && better < 0) {
        const int node = frontier.front();
        frontier.pop_front();
        if (timed_out()) {
          out.status = Status::kTimeout;
          return out;
        }
        ++expanded_;
        applicable(pool_.get(node), succ);
        for (int ai : succ) {
          apply(pool_.get(node), ai, scratch_.data());
          const int id = add_node(scratch_.data(), -1, -1, 0, fresh, improved);
          if (parent.count(id)) continue;
          parent[id] = {node, ai};
          if (fresh) nodes_[static_cast<std::size_t>(id)].h = heuristic(scratch_.data());
          const int h = nodes_[static_cast<std::size_t>(id)].h;
          if (h == kInfinity) continue;
          if (h < h_cur) {
            better = id;
            h_cur = h;
            break;
          }
          frontier.push_back(id);
        }
      }
      if (better < 0) return out;
      std::vector<int> segment;
      for (int n = better; parent[n].first >= 0; n = parent[n].first) segment.push_back(parent[n].second);
      std::reverse(segment.begin(), segment.end());
      plan.insert(plan.end(), segment.begin(), segment.end());
      current = better;
    }
    out.status = Status::kSolved;
    for (int ai : plan) out.plan.actions.push_back(c_.actions()[static_cast<std::size_t>(ai)].original);
    return out;
  }

  const pddl::GroundTask& task_;
  SearchConfig cfg_;
  Compiled c_;
  Relaxation relax_;
  StatePool pool_;
  std::vector<Node> nodes_;
  std::vector<uint64_t> scratch_;
  mutable std::vector<int> fired_;
  Clock::time_point start_;
  std::size_t expanded_ = 0;
};

}  // namespace

int h_ff(const pddl::GroundTask& task, const std::vector<int>& state) {
  Compiled c(task);
  if (c.goal_impossible()) return kInfinity;
  Relaxation r(c);
  return r.h_ff(c.pack(state).data());
}

int h_max(const pddl::GroundTask& task, const std::vector<int>& state) {
  Compiled c(task);
  if (c.goal_impossible()) return kInfinity;
  Relaxation r(c);
  return r.h_max(c.pack(state).data());
}

PlanOutcome solve(const pddl::GroundTask& task, const SearchConfig& config) {
  if (config.weight < 1) throw std::invalid_argument("weight must be at least 1");
  if (!(config.timeout_s > 0)) throw std::invalid_argument("timeout must be positive");
  return Searcher(task, config).run();
}

bool applicable(const pddl::GroundTask& task, const std::vector<int>& state, int action) {
  const auto& a = task.actions.at(static_cast<std::size_t>(action));
  return std::all_of(a.pre.begin(), a.pre.end(),
                     [&](int p) { return std::binary_search(state.begin(), state.end(), p); });
}

std::vector<int> successor(const pddl::GroundTask& task, const std::vector<int>& state, int action) {
  const auto& a = task.actions.at(static_cast<std::size_t>(action));
  std::vector<char> truth(task.atoms.size(), 0);
  for (int x : state) truth[static_cast<std::size_t>(x)] = 1;
  std::vector<const pddl::GroundEffect*> fired;
  for (const auto& e : a.effects) {
    if (std::all_of(e.condition.begin(), e.condition.end(),
                    [&](int c) { return truth[static_cast<std::size_t>(c)] != 0; })) {
      fired.push_back(&e);
    }
  }
  for (const auto* e : fired) {
    for (int x : e->del) truth[static_cast<std::size_t>(x)] = 0;
  }
  for (const auto* e : fired) {
    for (int x : e->add) truth[static_cast<std::size_t>(x)] = 1;
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

bool validate(const pddl::GroundTask& task, const Plan& plan) {
  std::vector<int> state = task.init;
  for (int a : plan.actions) {
    if (a < 0 || static_cast<std::size_t>(a) >= task.actions.size()) return false;
    if (!applicable(task, state, a)) return false;
    state = successor(task, state, a);
  }
  return std::all_of(task.goal.begin(), task.goal.end(),
                     [&](int g) { return std::binary_search(state.begin(), state.end(), g); });
}

std::string format_plan(const pddl::GroundTask& task, const Plan& plan) {
  std::ostringstream os;
  for (int a : plan.actions) os << task.actions.at(static_cast<std::size_t>(a)).label() << '\n';
  os << "; length = " << plan.length() << '\n';
  return os.str();
}

}  // namespace dqp::planner
