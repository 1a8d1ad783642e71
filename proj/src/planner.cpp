#include "svip/planner.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <functional>
#include <unordered_map>
#include <variant>

#include "svip/generator.hpp"

namespace svip {

const GeneratorFn* StreamRegistry::generator(const std::string& name) const {
  auto it = gens_.find(name);
  return it == gens_.end() ? nullptr : &it->second;
}

const TestFn* StreamRegistry::test(const std::string& name) const {
  auto it = tests_.find(name);
  return it == tests_.end() ? nullptr : &it->second;
}

std::set<std::string> fluent_predicates(const Domain& domain) {
  std::set<std::string> out;
  for (const auto& a : domain.actions)
    for (const auto& l : a.eff) out.insert(l.predicate);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;
using Binding = std::map<std::string, std::string>;

struct BudgetExceeded {};
struct Timeout {};

std::string substitute(const std::string& arg, const Binding& b) {
  if (!is_variable(arg)) return arg;
  auto it = b.find(arg);
  return it == b.end() ? arg : it->second;
}

Literal substitute(const Literal& l, const Binding& b) {
  Literal out(l.predicate, {}, l.negated);
  out.args.reserve(l.args.size());
  for (const auto& a : l.args) out.args.push_back(substitute(a, b));
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = " ") {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string step_string(const PlanStep& s) { return "(" + s.action + (s.args.empty() ? "" : " " + join(s.args)) + ")"; }

// ---------------------------------------------------------------------------
// Object universe

struct Universe {
  const Domain* domain = nullptr;
  std::map<std::string, std::string> types;

  bool has(const std::string& obj, const std::string& type) const {
    auto it = types.find(obj);
    return it != types.end() && domain->is_subtype(it->second, type);
  }
  std::vector<std::string> objects_of(const std::string& type) const {
    std::vector<std::string> out;
    for (const auto& [o, t] : types)
      if (domain->is_subtype(t, type)) out.push_back(o);
    return out;
  }
};

Universe make_universe(const Domain& d, const Problem& p, const std::map<std::string, std::string>& extra) {
  Universe u;
  u.domain = &d;
  for (const auto& o : p.objects) u.types[o.name] = o.type;
  for (const auto& [o, t] : extra) u.types.emplace(o, t);
  return u;
}

// ---------------------------------------------------------------------------
// Grounding

struct GroundAction {
  const ActionSchema* schema = nullptr;
  std::vector<std::string> args;
  std::vector<int> pre_pos, pre_neg, add, del;
  std::vector<std::vector<int>> forbidden;  // fluent contexts in which a con fact was refuted
  std::vector<Literal> statics;              // positive static pre / con facts used
};

using FactIndex = std::map<std::string, std::vector<const Literal*>>;

FactIndex index_facts(const std::vector<const FactSet*>& sets) {
  FactIndex idx;
  for (const FactSet* s : sets)
    for (const auto& l : *s) idx[l.predicate].push_back(&l);
  return idx;
}

bool unify(const Literal& pattern, const Literal& fact, Binding& b, std::vector<std::string>& newly) {
  if (pattern.args.size() != fact.args.size()) return false;
  for (size_t i = 0; i < pattern.args.size(); ++i) {
    const std::string& a = pattern.args[i];
    if (!is_variable(a)) {
      if (a != fact.args[i]) return false;
      continue;
    }
    auto it = b.find(a);
    if (it != b.end()) {
      if (it->second != fact.args[i]) return false;
    } else {
      b[a] = fact.args[i];
      newly.push_back(a);
    }
  }
  return true;
}

/// Enumerate bindings of `params` such that every literal of `lits` is in the
/// index and every parameter has the declared type. Unconstrained parameters
/// range over the typed universe.
void match_all(const std::vector<Literal>& lits, const std::vector<TypedName>& params, const FactIndex& idx,
               const Universe& u, size_t i, Binding& b, const std::function<void(const Binding&)>& emit) {
  if (i == lits.size()) {
    for (const auto& p : params) {
      auto it = b.find(p.name);
      if (it != b.end()) {
        if (!u.has(it->second, p.type)) return;
        continue;
      }
      for (const auto& o : u.objects_of(p.type)) {
        b[p.name] = o;
        match_all(lits, params, idx, u, i, b, emit);
      }
      b.erase(p.name);
      return;
    }
    emit(b);
    return;
  }
  auto it = idx.find(lits[i].predicate);
  if (it == idx.end()) return;
  for (const Literal* f : it->second) {
    std::vector<std::string> newly;
    if (unify(lits[i], *f, b, newly)) {
      bool typed = true;
      for (const auto& v : newly)
        for (const auto& p : params)
          if (p.name == v && !u.has(b[v], p.type)) typed = false;
      if (typed) match_all(lits, params, idx, u, i + 1, b, emit);
    }
    for (const auto& v : newly) b.erase(v);
  }
}

struct FluentTable {
  std::map<Literal, int> id;
  std::vector<Literal> facts;
  int intern(const Literal& l) {
    auto [it, fresh] = id.emplace(l, static_cast<int>(facts.size()));
    if (fresh) facts.push_back(l);
    return it->second;
  }
  int find(const Literal& l) const {
    auto it = id.find(l);
    return it == id.end() ? -1 : it->second;
  }
};

using ContextBlames = std::map<Literal, std::vector<std::vector<Literal>>>;

struct Task {
  const Domain* domain = nullptr;
  std::set<std::string> fluent_preds;
  FactSet statics;
  FactSet init_fluents;
  std::vector<Literal> goal;
  Universe universe;
  ContextBlames context_blames;
};

struct Grounded {
  FluentTable fluents;
  std::vector<GroundAction> actions;
  std::vector<int> goal_pos, goal_neg;
  bool goal_static_ok = true;
};

Grounded ground(const Task& t) {
  Grounded g;
  for (const auto& f : t.init_fluents) g.fluents.intern(f);
  FactSet reach = t.init_fluents;
  std::vector<std::pair<const ActionSchema*, Binding>> found;
  for (;;) {
    const FactIndex idx = index_facts({&t.statics, &reach});
    found.clear();
    FactSet next = reach;
    for (const auto& a : t.domain->actions) {
      std::vector<Literal> lits;
      for (const auto& l : a.pre)
        if (!l.negated) lits.push_back(l);
      for (const auto& l : a.con) lits.push_back(l.positive());
      Binding b;
      match_all(lits, a.params, idx, t.universe, 0, b, [&](const Binding& bb) {
        for (const auto& l : a.pre)
          if (l.negated && !t.fluent_preds.count(l.predicate) && t.statics.count(substitute(l.positive(), bb))) return;
        found.emplace_back(&a, bb);
        for (const auto& e : a.eff)
          if (!e.negated) next.insert(substitute(e, bb));
      });
    }
    if (next.size() == reach.size()) break;
    reach = std::move(next);
  }
  for (const auto& [a, b] : found) {
    GroundAction ga;
    ga.schema = a;
    for (const auto& p : a->params) ga.args.push_back(b.at(p.name));
    for (const auto& l : a->pre) {
      const Literal s = substitute(l.positive(), b);
      if (t.fluent_preds.count(l.predicate)) {
        (l.negated ? ga.pre_neg : ga.pre_pos).push_back(g.fluents.intern(s));
      } else if (!l.negated) {
        ga.statics.push_back(s);
      }
    }
    for (const auto& l : a->con) {
      const Literal s = substitute(l.positive(), b);
      ga.statics.push_back(s);
      auto it = t.context_blames.find(s);
      if (it == t.context_blames.end()) continue;
      for (const auto& ctx : it->second) {
        std::vector<int> ids;
        for (const auto& c : ctx) ids.push_back(g.fluents.intern(c));
        ga.forbidden.push_back(std::move(ids));
      }
    }
    for (const auto& e : a->eff) (e.negated ? ga.del : ga.add).push_back(g.fluents.intern(substitute(e.positive(), b)));
    g.actions.push_back(std::move(ga));
  }
  std::sort(g.actions.begin(), g.actions.end(), [](const GroundAction& x, const GroundAction& y) {
    return std::tie(x.schema->name, x.args) < std::tie(y.schema->name, y.args);
  });
  for (const auto& l : t.goal) {
    const Literal s = l.positive();
    if (t.fluent_preds.count(l.predicate)) {
      (l.negated ? g.goal_neg : g.goal_pos).push_back(g.fluents.intern(s));
    } else if (t.statics.count(s) == l.negated) {
      g.goal_static_ok = false;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Skeleton search: IDA* over bitset states with an h_max guide.

struct BitState {
  std::vector<uint64_t> w;
  bool test(int i) const { return (w[static_cast<size_t>(i) >> 6] >> (i & 63)) & 1ULL; }
  void set(int i) { w[static_cast<size_t>(i) >> 6] |= 1ULL << (i & 63); }
  void reset(int i) { w[static_cast<size_t>(i) >> 6] &= ~(1ULL << (i & 63)); }
  bool operator==(const BitState&) const = default;
};

struct BitHash {
  size_t operator()(const BitState& s) const {
    uint64_t h = 1469598103934665603ULL;
    for (uint64_t x : s.w) h = (h ^ x) * 1099511628211ULL;
    return static_cast<size_t>(h);
  }
};

class Searcher {
 public:
  Searcher(const Grounded& g, int max_length, size_t node_budget, Clock::time_point deadline)
      : g_(g), max_len_(max_length), budget_(node_budget), deadline_(deadline) {
    const size_t n = g.fluents.facts.size();
    needed_by_.resize(n);
    for (size_t a = 0; a < g.actions.size(); ++a)
      for (int f : g.actions[a].pre_pos) needed_by_[static_cast<size_t>(f)].push_back(static_cast<int>(a));
    layer_.assign(n, -1);
    unsat_.assign(g.actions.size(), 0);
  }

  /// Skeletons in nondecreasing length; with max_count == 1 duplicate states
  /// are pruned, otherwise distinct action sequences are enumerated.
  std::vector<std::vector<int>> run(const BitState& init, size_t max_count) {
    std::vector<std::vector<int>> out;
    if (!g_.goal_static_ok) return out;
    const int h0 = hmax(init);
    if (h0 < 0) return out;
    prune_equal_ = max_count == 1;
    for (int bound = h0; bound <= max_len_ && out.size() < max_count; ++bound) {
      tt_.clear();
      bound_ = bound;
      path_.clear();
      dfs(init, 0, out, max_count);
    }
    return out;
  }

  size_t nodes() const { return nodes_; }

 private:
  bool is_goal(const BitState& s) const {
    for (int f : g_.goal_pos)
      if (!s.test(f)) return false;
    for (int f : g_.goal_neg)
      if (s.test(f)) return false;
    return true;
  }

  bool applicable(const GroundAction& a, const BitState& s) const {
    for (int f : a.pre_pos)
      if (!s.test(f)) return false;
    for (int f : a.pre_neg)
      if (s.test(f)) return false;
    for (const auto& ctx : a.forbidden) {
      bool all = true;
      for (int f : ctx) all = all && s.test(f);
      if (all) return false;
    }
    return true;
  }

  /// Layer of the goal in the relaxed planning graph, -1 if unreachable.
  int hmax(const BitState& s) {
    std::fill(layer_.begin(), layer_.end(), -1);
    std::vector<int> cur, nxt;
    for (size_t f = 0; f < layer_.size(); ++f)
      if (s.test(static_cast<int>(f))) {
        layer_[f] = 0;
        cur.push_back(static_cast<int>(f));
      }
    for (size_t a = 0; a < g_.actions.size(); ++a) unsat_[a] = static_cast<int>(g_.actions[a].pre_pos.size());
    auto fire = [&](int a, int k) {
      for (int f : g_.actions[static_cast<size_t>(a)].add)
        if (layer_[static_cast<size_t>(f)] < 0) {
          layer_[static_cast<size_t>(f)] = k + 1;
          nxt.push_back(f);
        }
    };
    for (size_t a = 0; a < g_.actions.size(); ++a)
      if (unsat_[a] == 0) fire(static_cast<int>(a), 0);
    for (int k = 0; !cur.empty() || !nxt.empty(); ++k) {
      for (int f : cur)
        for (int a : needed_by_[static_cast<size_t>(f)])
          if (--unsat_[static_cast<size_t>(a)] == 0) fire(a, k);
      cur.swap(nxt);
      nxt.clear();
    }
    int h = 0;
    for (int f : g_.goal_pos) {
      if (layer_[static_cast<size_t>(f)] < 0) return -1;
      h = std::max(h, layer_[static_cast<size_t>(f)]);
    }
    return h;
  }

  void dfs(const BitState& s, int g, std::vector<std::vector<int>>& out, size_t max_count) {
    if (++nodes_ > budget_) throw BudgetExceeded{};
    if ((nodes_ & 1023) == 0 && Clock::now() > deadline_) throw Timeout{};
    if (is_goal(s)) {
      if (g == bound_) out.push_back(path_);
      return;
    }
    if (g >= bound_) return;
    const int h = hmax(s);
    if (h < 0 || g + h > bound_) return;
    auto [it, fresh] = tt_.emplace(s, g);
    if (!fresh) {
      if (it->second < g || (prune_equal_ && it->second == g)) return;
      it->second = g;
    }
    for (size_t a = 0; a < g_.actions.size() && out.size() < max_count; ++a) {
      const GroundAction& ga = g_.actions[a];
      if (!applicable(ga, s)) continue;
      BitState n = s;
      for (int f : ga.del) n.reset(f);
      for (int f : ga.add) n.set(f);
      path_.push_back(static_cast<int>(a));
      dfs(n, g + 1, out, max_count);
      path_.pop_back();
    }
  }

  const Grounded& g_;
  int max_len_;
  size_t budget_;
  Clock::time_point deadline_;
  std::vector<std::vector<int>> needed_by_;
  std::vector<int> layer_, unsat_;
  std::unordered_map<BitState, int, BitHash> tt_;
  std::vector<int> path_;
  int bound_ = 0;
  bool prune_equal_ = true;
  size_t nodes_ = 0;
};

BitState initial_state(const Grounded& g, const FactSet& init) {
  BitState s;
  s.w.assign((g.fluents.facts.size() + 63) / 64, 0);
  for (const auto& f : init) {
    const int i = g.fluents.find(f);
    if (i >= 0) s.set(i);
  }
  return s;
}

std::vector<std::vector<PlanStep>> search(const Task& t, int max_len, size_t budget, size_t max_count,
                                          Clock::time_point deadline) {
  const Grounded g = ground(t);
  Searcher s(g, max_len, budget, deadline);
  std::vector<std::vector<PlanStep>> out;
  for (const auto& path : s.run(initial_state(g, t.init_fluents), max_count)) {
    std::vector<PlanStep> steps;
    for (int a : path) steps.push_back({g.actions[static_cast<size_t>(a)].schema->name, g.actions[static_cast<size_t>(a)].args});
    out.push_back(std::move(steps));
  }
  return out;
}

Task make_task(const Domain& d, const Problem& p) {
  Task t;
  t.domain = &d;
  t.fluent_preds = fluent_predicates(d);
  for (const auto& l : p.init) (t.fluent_preds.count(l.predicate) ? t.init_fluents : t.statics).insert(l);
  t.goal = p.goal;
  return t;
}

// ---------------------------------------------------------------------------
// Optimistic stream closure

struct Instance {
  const StreamDecl* decl = nullptr;
  std::vector<std::string> inputs;   // may name placeholders
  std::vector<std::string> outputs;  // placeholders
  std::vector<Literal> certified;
  std::vector<Literal> domain;
  bool disabled = false;
};

struct Closure {
  std::vector<Instance> instances;
  std::map<std::string, int> producer;        // placeholder -> instance
  std::map<Literal, int> optimistic;          // fact -> certifying instance
  std::map<std::string, std::string> types;   // placeholder -> type
  FactSet concrete;                           // facts certified by eager tests
  std::vector<std::string> eager_failures;
};

bool is_placeholder(const std::string& s) { return !s.empty() && s.front() == '#'; }

std::string output_type(const Domain& d, const StreamDecl& s, const std::string& var) {
  for (const auto& l : s.certified) {
    const PredicateDecl* p = d.predicate(l.predicate);
    if (!p) continue;
    for (size_t i = 0; i < l.args.size() && i < p->params.size(); ++i)
      if (l.args[i] == var) return p->params[i].type;
  }
  return "object";
}

StreamCall make_call(const StreamDecl* decl, std::vector<std::string> inputs, const ValueTable& values, uint64_t seed,
                     const std::vector<Literal>* ctx) {
  StreamCall c;
  c.decl = decl;
  c.inputs = std::move(inputs);
  c.values = &values;
  c.seed = seed;
  c.context = ctx;
  return c;
}

Closure optimistic_closure(const Domain& d, const Problem& p, const Task& t, const StreamRegistry& reg,
                           const ValueTable& values, uint64_t seed, int rounds = 4) {
  Closure c;
  std::set<std::pair<std::string, std::vector<std::string>>> seen;
  FactSet facts = t.statics;
  facts.insert(t.init_fluents.begin(), t.init_fluents.end());
  std::map<std::string, int> depth;
  int counter = 0;
  for (int round = 0; round < rounds; ++round) {
    bool grew = false;
    for (const auto& s : d.streams) {
      Universe u = make_universe(d, p, c.types);
      const FactIndex idx = index_facts({&facts});
      std::vector<Binding> bindings;
      std::vector<TypedName> params;
      for (const auto& in : s.inputs) params.push_back({in, "object"});
      Binding b;
      match_all(s.domain, params, idx, u, 0, b, [&](const Binding& bb) { bindings.push_back(bb); });
      std::sort(bindings.begin(), bindings.end());
      for (const auto& bb : bindings) {
        std::vector<std::string> ins;
        int dmax = 0;
        for (const auto& in : s.inputs) {
          ins.push_back(bb.at(in));
          auto it = depth.find(ins.back());
          if (it != depth.end()) dmax = std::max(dmax, it->second);
        }
        if (!seen.emplace(s.name, ins).second) continue;
        if (dmax >= rounds) continue;
        grew = true;
        const bool concrete = std::none_of(ins.begin(), ins.end(), is_placeholder);
        if (s.kind == StreamKind::Test && concrete && s.context.empty()) {
          const TestFn* fn = reg.test(s.name);
          const bool ok = (*fn)(make_call(&s, ins, values, derive_seed(seed, s.name), nullptr));
          if (!ok) {
            c.eager_failures.push_back(s.name + "(" + join(ins) + ")");
            continue;
          }
          for (const auto& l : s.certified) {
            const Literal f = substitute(l, bb);
            c.concrete.insert(f);
            facts.insert(f);
          }
          continue;
        }
        Instance inst;
        inst.decl = &s;
        inst.inputs = ins;
        Binding full = bb;
        for (const auto& o : s.outputs) {
          std::string name = "#" + o.substr(1) + std::to_string(counter++);
          full[o] = name;
          inst.outputs.push_back(name);
          c.types[name] = output_type(d, s, o);
          depth[name] = dmax + 1;
        }
        const int id = static_cast<int>(c.instances.size());
        for (const auto& o : inst.outputs) c.producer[o] = id;
        for (const auto& l : s.domain) inst.domain.push_back(substitute(l, bb));
        for (const auto& l : s.certified) {
          const Literal f = substitute(l, full);
          inst.certified.push_back(f);
          c.optimistic.emplace(f, id);
          facts.insert(f);
        }
        c.instances.push_back(std::move(inst));
      }
    }
    if (!grew) break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Binding

struct BindFailure {
  int instance = -1;
  std::vector<Literal> context;  // skeleton-level context for a state-dependent test
  bool exhausted = false;        // generator ran out of draws
};

class Binder {
 public:
  Binder(const Domain& d, const Problem& p, const Task& t, const StreamRegistry& reg, const Closure& c,
         const SolveConfig& cfg, std::map<std::string, int>& calls, int& handle_counter, Clock::time_point deadline)
      : d_(d), p_(p), t_(t), reg_(reg), c_(c), cfg_(cfg), calls_(calls), handles_(handle_counter), deadline_(deadline) {}

  /// Returns the bound plan or the failure to blame.
  std::variant<Plan, BindFailure> bind(const std::vector<PlanStep>& skel) {
    required_ = required_instances(skel);
    BindFailure last;
    for (int attempt = 0; attempt < std::max(1, cfg_.bind_attempts); ++attempt) {
      auto r = attempt_once(skel);
      if (std::holds_alternative<Plan>(r)) return r;
      last = std::get<BindFailure>(r);
      if (last.exhausted) return last;
    }
    return last;
  }

 private:
  std::vector<int> required_instances(const std::vector<PlanStep>& skel) const {
    std::set<int> req;
    std::vector<int> stack;
    auto need = [&](int id) {
      if (req.insert(id).second) stack.push_back(id);
    };
    for (const auto& st : skel) {
      const ActionSchema* a = d_.action(st.action);
      Binding b;
      for (size_t i = 0; i < a->params.size(); ++i) b[a->params[i].name] = st.args[i];
      for (const auto& arg : st.args)
        if (is_placeholder(arg)) need(c_.producer.at(arg));
      auto use = [&](const Literal& l) {
        auto it = c_.optimistic.find(substitute(l.positive(), b));
        if (it != c_.optimistic.end()) need(it->second);
      };
      for (const auto& l : a->pre)
        if (!l.negated) use(l);
      for (const auto& l : a->con) use(l);
    }
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      const Instance& in = c_.instances[static_cast<size_t>(id)];
      for (const auto& x : in.inputs)
        if (is_placeholder(x)) need(c_.producer.at(x));
      for (const auto& l : in.domain) {
        auto it = c_.optimistic.find(l);
        if (it != c_.optimistic.end()) need(it->second);
      }
    }
    return {req.begin(), req.end()};
  }

  std::string resolve(const std::string& x) const {
    auto it = bound_.find(x);
    return it == bound_.end() ? x : it->second;
  }

  std::vector<std::string> concrete_inputs(const Instance& in) const {
    std::vector<std::string> v;
    for (const auto& x : in.inputs) v.push_back(resolve(x));
    return v;
  }

  /// Latest required generator (before position i) producing an input of `in`.
  int feeder(const Instance& in, size_t i) const {
    for (size_t k = i; k-- > 0;) {
      const Instance& g = c_.instances[static_cast<size_t>(required_[k])];
      if (g.decl->kind != StreamKind::Generator) continue;
      for (const auto& o : g.outputs)
        if (std::find(in.inputs.begin(), in.inputs.end(), o) != in.inputs.end()) return static_cast<int>(k);
    }
    return -1;
  }

  std::variant<Plan, BindFailure> attempt_once(const std::vector<PlanStep>& skel) {
    bound_.clear();
    values_ = p_.values;
    std::map<int, int> local;  // draws of each position in this attempt
    const int local_limit = std::max(1, cfg_.stream_budget / std::max(1, cfg_.bind_attempts));
    int failed_test = -1;  // a test we backjumped from; blamed if its feeders run dry
    auto backjump = [&](int f) {
      for (auto it = local.begin(); it != local.end();) it = it->first > f ? local.erase(it) : std::next(it);
      return static_cast<size_t>(f);
    };
    size_t i = 0;
    while (i < required_.size()) {
      if (Clock::now() > deadline_) throw Timeout{};
      const int id = required_[i];
      const Instance& in = c_.instances[static_cast<size_t>(id)];
      if (in.decl->kind == StreamKind::Generator) {
        const std::vector<std::string> ins = concrete_inputs(in);
        const std::string key = in.decl->name + "(" + join(ins) + ")";
        int& n = calls_[key];
        if (n >= cfg_.stream_budget) {
          if (failed_test >= 0) return BindFailure{failed_test, {}, false};
          return BindFailure{id, {}, true};
        }
        const uint64_t seed = derive_seed(cfg_.seed, key + "#" + std::to_string(n++));
        const auto out = (*reg_.generator(in.decl->name))(make_call(in.decl, ins, values_, seed, nullptr));
        if (!out || out->size() != in.outputs.size()) {
          if (++local[static_cast<int>(i)] >= local_limit) {
            const int f = feeder(in, i);
            if (f < 0) return BindFailure{id, {}, false};
            i = backjump(f);
          }
          continue;
        }
        for (size_t k = 0; k < in.outputs.size(); ++k) {
          std::string h = in.decl->outputs[k].substr(1) + "#" + std::to_string(handles_++);
          values_[h] = (*out)[k];
          bound_[in.outputs[k]] = h;
        }
        ++i;
      } else if (!in.decl->context.empty()) {
        ++i;  // checked along the skeleton below
      } else {
        const std::vector<std::string> ins = concrete_inputs(in);
        const bool ok = (*reg_.test(in.decl->name))(make_call(in.decl, ins, values_, derive_seed(cfg_.seed, in.decl->name), nullptr));
        if (ok) {
          ++i;
          continue;
        }
        const int f = feeder(in, i);
        if (f < 0) return BindFailure{id, {}, false};
        failed_test = id;
        i = backjump(f);
      }
    }
    return check_context(skel);
  }

  std::variant<Plan, BindFailure> check_context(const std::vector<PlanStep>& skel) {
    Plan plan;
    FactSet state = t_.init_fluents;
    plan.certified = t_.statics;
    for (const auto& f : c_.concrete) plan.certified.insert(f);
    for (int id : required_) {
      const Instance& in = c_.instances[static_cast<size_t>(id)];
      if (in.decl->context.empty())
        for (const auto& l : in.certified) plan.certified.insert(rebind(l));
    }
    for (const auto& st : skel) {
      const ActionSchema* a = d_.action(st.action);
      Binding b;
      for (size_t k = 0; k < a->params.size(); ++k) b[a->params[k].name] = st.args[k];
      for (const auto& l : a->con) {
        const Literal f = substitute(l.positive(), b);
        auto it = c_.optimistic.find(f);
        if (it == c_.optimistic.end()) continue;
        const Instance& in = c_.instances[static_cast<size_t>(it->second)];
        if (in.decl->context.empty()) continue;
        std::vector<Literal> ctx_skel, ctx;
        for (const auto& s : state)
          if (std::find(in.decl->context.begin(), in.decl->context.end(), s.predicate) != in.decl->context.end()) {
            ctx_skel.push_back(s);
            ctx.push_back(rebind(s));
          }
        const bool ok = (*reg_.test(in.decl->name))(
            make_call(in.decl, concrete_inputs(in), values_, derive_seed(cfg_.seed, in.decl->name), &ctx));
        if (!ok) return BindFailure{it->second, ctx_skel, false};
        plan.certified.insert(rebind(f));
      }
      for (const auto& e : a->eff)
        if (e.negated) state.erase(substitute(e.positive(), b));
      for (const auto& e : a->eff)
        if (!e.negated) state.insert(substitute(e, b));
      PlanStep cs{st.action, {}};
      for (const auto& x : st.args) cs.args.push_back(resolve(x));
      plan.steps.push_back(std::move(cs));
    }
    for (const auto& st : plan.steps)
      for (const auto& x : st.args) {
        auto it = values_.find(x);
        if (it != values_.end()) plan.values[x] = it->second;
      }
    return plan;
  }

  Literal rebind(const Literal& l) const {
    Literal out = l;
    for (auto& a : out.args) a = resolve(a);
    return out;
  }

  const Domain& d_;
  const Problem& p_;
  const Task& t_;
  const StreamRegistry& reg_;
  const Closure& c_;
  const SolveConfig& cfg_;
  std::map<std::string, int>& calls_;
  int& handles_;
  Clock::time_point deadline_;
  std::vector<int> required_;
  std::map<std::string, std::string> bound_;
  ValueTable values_;
};

void check_registry(const Domain& d, const StreamRegistry& reg) {
  for (const auto& s : d.streams) {
    const bool ok = s.kind == StreamKind::Generator ? reg.generator(s.name) != nullptr : reg.test(s.name) != nullptr;
    if (!ok) throw ConfigError("stream '" + s.name + "' has no registered implementation");
  }
}

void disable(Closure& c, int id, FactSet& removed) {
  Instance& in = c.instances[static_cast<size_t>(id)];
  if (in.disabled) return;
  in.disabled = true;
  for (const auto& f : in.certified) removed.insert(f);
  for (size_t k = 0; k < c.instances.size(); ++k)
    for (const auto& x : c.instances[k].inputs)
      if (std::find(in.outputs.begin(), in.outputs.end(), x) != in.outputs.end()) disable(c, static_cast<int>(k), removed);
}

}  // namespace

// ---------------------------------------------------------------------------

SolveResult solve(const Domain& domain, const Problem& problem, const StreamRegistry& streams, const SolveConfig& config) {
  check_registry(domain, streams);
  const auto t0 = Clock::now();
  const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config.timeout));
  SolveResult res;
  auto finish = [&](std::optional<Plan> plan, std::optional<Failure> fail) {
    res.plan = std::move(plan);
    res.failure = std::move(fail);
    res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return res;
  };

  Task base = make_task(domain, problem);
  Closure closure = optimistic_closure(domain, problem, base, streams, problem.values, config.seed);
  FactSet removed;
  ContextBlames blames;
  std::map<std::string, int> calls;
  int handles = 0;
  bool sampled_blame = false;
  std::string last_blamed;

  for (int iter = 1;; ++iter) {
    if (Clock::now() > deadline) return finish(std::nullopt, Failure{"timeout", last_blamed, iter - 1});
    Task t = base;
    t.universe = make_universe(domain, problem, closure.types);
    for (const auto& f : closure.concrete) t.statics.insert(f);
    for (const auto& [f, id] : closure.optimistic)
      if (!removed.count(f)) t.statics.insert(f);
    t.context_blames = blames;

    std::vector<std::vector<PlanStep>> skel;
    try {
      skel = search(t, config.max_length, config.node_budget, 1, deadline);
    } catch (const Timeout&) {
      return finish(std::nullopt, Failure{"timeout", last_blamed, iter});
    } catch (const BudgetExceeded&) {
      if (config.trace) *config.trace << "iteration " << iter << ": node budget exceeded\n";
      return finish(std::nullopt, Failure{"unsatisfiable-skeleton-space", last_blamed, iter});
    }
    if (skel.empty()) {
      if (config.trace) *config.trace << "iteration " << iter << ": no skeleton\n";
      return finish(std::nullopt, Failure{sampled_blame ? "stream-exhaustion" : "unsatisfiable-skeleton-space", last_blamed, iter});
    }
    const auto& sk = skel.front();
    if (config.trace) {
      *config.trace << "iteration " << iter << ": skeleton length " << sk.size() << ":";
      for (const auto& s : sk) *config.trace << ' ' << step_string(s);
      *config.trace << '\n';
    }

    std::variant<Plan, BindFailure> r;
    try {
      Binder binder(domain, problem, t, streams, closure, config, calls, handles, deadline);
      r = binder.bind(sk);
    } catch (const Timeout&) {
      return finish(std::nullopt, Failure{"timeout", last_blamed, iter});
    }
    if (std::holds_alternative<Plan>(r)) {
      Plan plan = std::move(std::get<Plan>(r));
      plan.iterations = iter;
      const std::string err = validate_plan(domain, problem, plan.steps, plan.certified);
      if (!err.empty()) throw std::logic_error("bound plan failed validation: " + err);
      if (config.trace) *config.trace << "iteration " << iter << ": bound\n";
      return finish(std::move(plan), std::nullopt);
    }
    const BindFailure bf = std::get<BindFailure>(r);
    const Instance& in = closure.instances[static_cast<size_t>(bf.instance)];
    last_blamed = in.decl->name;
    sampled_blame = true;
    if (config.trace) {
      *config.trace << "iteration " << iter << ": blame " << in.decl->name << "(" << join(in.inputs) << ")";
      if (bf.exhausted) *config.trace << " exhausted";
      for (const auto& c : bf.context) *config.trace << " | " << c.to_string();
      *config.trace << '\n';
    }
    if (bf.exhausted) {
      disable(closure, bf.instance, removed);
    } else if (!in.decl->context.empty()) {
      for (const auto& f : in.certified) blames[f].push_back(bf.context);
    } else {
      for (const auto& f : in.certified) removed.insert(f);
    }
  }
}

std::vector<std::vector<PlanStep>> plan_skeletons(const Domain& domain, const Problem& problem, const SkeletonQuery& q,
                                                  size_t max_count) {
  Task t = make_task(domain, problem);
  t.universe = make_universe(domain, problem, q.placeholder_types);
  for (const auto& f : q.optimistic) (t.fluent_preds.count(f.predicate) ? t.init_fluents : t.statics).insert(f);
  try {
    return search(t, q.max_length, q.node_budget, max_count, Clock::time_point::max());
  } catch (const BudgetExceeded&) {
    throw std::runtime_error("budget-exceeded: skeleton search exceeded its node budget");
  }
}

std::string validate_plan(const Domain& domain, const Problem& problem, const std::vector<PlanStep>& steps,
                          const FactSet& certified) {
  const auto fluents = fluent_predicates(domain);
  FactSet state, statics = certified;
  for (const auto& l : problem.init) (fluents.count(l.predicate) ? state : statics).insert(l);
  auto holds = [&](const Literal& l) {
    const Literal s = l.positive();
    const bool in = fluents.count(l.predicate) ? state.count(s) > 0 : statics.count(s) > 0;
    return in != l.negated;
  };
  for (size_t i = 0; i < steps.size(); ++i) {
    const ActionSchema* a = domain.action(steps[i].action);
    if (!a) return "step " + std::to_string(i) + ": unknown action " + steps[i].action;
    if (a->params.size() != steps[i].args.size()) return "step " + std::to_string(i) + ": arity mismatch";
    Binding b;
    for (size_t k = 0; k < a->params.size(); ++k) b[a->params[k].name] = steps[i].args[k];
    for (const auto& l : a->pre)
      if (!holds(substitute(l, b))) return "step " + std::to_string(i) + ": precondition " + substitute(l, b).to_string();
    for (const auto& l : a->con)
      if (!statics.count(substitute(l.positive(), b)))
        return "step " + std::to_string(i) + ": uncertified " + substitute(l, b).to_string();
    for (const auto& e : a->eff)
      if (e.negated) state.erase(substitute(e.positive(), b));
    for (const auto& e : a->eff)
      if (!e.negated) state.insert(substitute(e, b));
  }
  for (const auto& l : problem.goal)
    if (!holds(l)) return "goal " + l.to_string() + " not satisfied";
  return {};
}

Json plan_to_json(const Plan& p) {
  Json steps = Json::array();
  for (const auto& s : p.steps) {
    Json handles = Json::array();
    for (const auto& a : s.args)
      if (p.values.count(a)) handles.push_back(a);
    steps.push_back({{"action", s.action}, {"args", s.args}, {"payload-handles", handles}});
  }
  Json values = Json::object();
  for (const auto& [k, v] : p.values) values[k] = pose_to_json(v);
  Json certified = Json::array();
  for (const auto& f : p.certified) {
    Json lit = Json::array({f.predicate});
    for (const auto& a : f.args) lit.push_back(a);
    certified.push_back(lit);
  }
  return {{"steps", steps},           {"values", values}, {"certified", certified},
          {"iterations", p.iterations}, {"length", p.steps.size()}};
}

Plan plan_from_json(const Json& j) {
  Plan p;
  for (const auto& s : j.at("steps")) p.steps.push_back({s.at("action").get<std::string>(), s.at("args").get<std::vector<std::string>>()});
  for (const auto& [k, v] : j.at("values").items()) p.values[k] = pose_from_json(v);
  for (const auto& lit : j.value("certified", Json::array())) {
    const auto parts = lit.get<std::vector<std::string>>();
    if (parts.empty()) throw std::invalid_argument("plan: empty certified literal");
    p.certified.insert(Literal(parts.front(), std::vector<std::string>(parts.begin() + 1, parts.end())));
  }
  p.iterations = j.value("iterations", 0);
  return p;
}

Json failure_to_json(const Failure& f) {
  return {{"reason", f.reason}, {"blamed-stream", f.blamed_stream}, {"iterations", f.iterations}};
}

}  // namespace svip
