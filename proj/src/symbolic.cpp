#include "svip/symbolic.hpp"

#include <algorithm>
#include <sstream>

namespace svip {

std::string Literal::to_string() const {
  std::string s = "(" + predicate;
  for (const auto& a : args) s += " " + a;
  s += ")";
  return negated ? "(not " + s + ")" : s;
}

const PredicateDecl* Domain::predicate(const std::string& n) const {
  for (const auto& p : predicates)
    if (p.name == n) return &p;
  return nullptr;
}

const ActionSchema* Domain::action(const std::string& n) const {
  for (const auto& a : actions)
    if (a.name == n) return &a;
  return nullptr;
}

const StreamDecl* Domain::stream(const std::string& n) const {
  for (const auto& s : streams)
    if (s.name == n) return &s;
  return nullptr;
}

bool Domain::is_functional(const std::string& p) const {
  return std::find(functional.begin(), functional.end(), p) != functional.end();
}

bool Domain::has_type(const std::string& t) const {
  if (t == "object") return true;
  for (const auto& [name, parent] : types)
    if (name == t) return true;
  return false;
}

bool Domain::is_subtype(const std::string& type, const std::string& ancestor) const {
  if (ancestor == "object") return true;
  std::string cur = type;
  for (size_t guard = 0; guard <= types.size(); ++guard) {
    if (cur == ancestor) return true;
    std::string next;
    for (const auto& [name, parent] : types)
      if (name == cur) next = parent;
    if (next.empty() || next == cur) return false;
    cur = next;
  }
  return false;
}

const TypedName* Problem::object(const std::string& n) const {
  for (const auto& o : objects)
    if (o.name == n) return &o;
  return nullptr;
}

bool Problem::operator==(const Problem& o) const {
  if (name != o.name || domain != o.domain || objects != o.objects || init != o.init || goal != o.goal) return false;
  if (values.size() != o.values.size()) return false;
  for (auto a = values.begin(), b = o.values.begin(); a != values.end(); ++a, ++b)
    if (a->first != b->first || a->second.to_array() != b->second.to_array()) return false;
  return true;
}

// ---------------------------------------------------------------------------

int payload_index(const std::string& predicate) {
  if (predicate == labels::AtGrasp) return 2;
  if (predicate == labels::AtConf) return 1;
  if (predicate == labels::AtPose) return 1;
  if (predicate == labels::AtRelativePose) return 2;
  return -1;
}

GroundedPredicates predicates_of_graph(const SceneGraph& g, std::string_view prime) {
  GroundedPredicates out;
  const std::string suffix(prime);
  for (const auto& e : g.edges) {
    if (e.label == labels::AtGrasp) {
      const std::string h = "g" + suffix + "_" + e.dst;
      out.literals.insert(Literal(labels::AtGrasp, {e.src, e.dst, h}));
      out.values[h] = e.payload;
    } else if (e.label == labels::AtConf) {
      const std::string h = "q" + suffix + "_" + e.dst;
      out.literals.insert(Literal(labels::AtConf, {e.dst, h}));
      out.values[h] = e.payload;
    } else if (e.label == labels::AtPose) {
      const std::string h = "p" + suffix + "_" + e.dst;
      out.literals.insert(Literal(labels::AtPose, {e.dst, h}));
      out.values[h] = e.payload;
    } else if (e.label == labels::AtRelativePose) {
      const std::string h = "p" + suffix + "_" + e.dst;
      out.literals.insert(Literal(labels::AtRelativePose, {e.src, e.dst, h}));
      out.values[h] = e.payload;
    } else if (e.label == labels::Contact) {
      out.literals.insert(Literal(labels::Contact, {e.src, e.dst}));
    } else {
      throw SymbolicError("predicates_of_graph: unknown edge label '" + e.label + "'");
    }
  }
  return out;
}

namespace {

bool is_contact_predicate(const std::string& p) {
  return p == labels::AtGrasp || p == labels::AtConf || p == labels::AtPose || p == labels::AtRelativePose ||
         p == labels::Contact;
}

std::vector<std::string> key_of(const Literal& l) {
  std::vector<std::string> k{l.predicate};
  const int pi = payload_index(l.predicate);
  for (size_t i = 0; i < l.args.size(); ++i)
    if (static_cast<int>(i) != pi) k.push_back(l.args[i]);
  return k;
}

}  // namespace

std::set<Literal> diff_effects(const std::set<Literal>& pre, const std::set<Literal>& eff) {
  std::set<Literal> out;
  std::set<std::vector<std::string>> added_keys;
  for (const auto& l : eff)
    if (!pre.count(l) && is_contact_predicate(l.predicate)) {
      out.insert(l);
      added_keys.insert(key_of(l));
    }
  for (const auto& l : pre)
    if (!eff.count(l) && is_contact_predicate(l.predicate) && !added_keys.count(key_of(l))) out.insert(l.flipped());
  return out;
}

Domain bioperation_base_domain() {
  Domain d;
  d.name = "bioperation";
  d.types = {{"arm", "object"},  {"left-arm", "arm"}, {"right-arm", "arm"}, {"obj", "object"}, {"region", "object"},
             {"pose", "object"}, {"grasp", "object"}, {"conf", "object"},     {"skill", "object"}};
  d.predicates = {
      {"AtGrasp", {{"?h", "arm"}, {"?o", "obj"}, {"?g", "grasp"}}},
      {"AtConf", {{"?h", "arm"}, {"?q", "conf"}}},
      {"AtPose", {{"?o", "obj"}, {"?p", "pose"}}},
      {"AtRelativePose", {{"?r", "region"}, {"?o", "obj"}, {"?p", "pose"}}},
      {"Contact", {{"?a", "obj"}, {"?b", "obj"}}},
      {"DoneBiOp", {{"?a", "skill"}}},
      {"SafeBiOp", {{"?a", "skill"}, {"?hl", "arm"}, {"?hr", "arm"}, {"?ql", "conf"}, {"?qr", "conf"}}},
      {"BiConf", {{"?a", "skill"}, {"?ql", "conf"}, {"?qr", "conf"}, {"?ql2", "conf"}, {"?qr2", "conf"}}},
  };
  d.functional = {"AtConf", "AtPose", "AtGrasp", "AtRelativePose"};
  return d;
}

SkillSchema skill_from_segment(const std::string& id, const DemoTrace& trace, const EventSequence& seq, size_t span) {
  if (span >= seq.contact_rich.size()) throw SymbolicError("skill_from_segment: no contact-rich span " + std::to_string(span));
  const auto& s = seq.contact_rich[span];
  SkillSchema skill;
  skill.id = id;
  skill.g_pre = seq.keyframes[s.pre].graph;
  skill.g_mid = seq.keyframes[s.mid].graph;
  if (s.eff) skill.g_eff = seq.keyframes[*s.eff].graph;
  skill.policy = "policy/" + id;
  skill.generator = "generator/" + id;
  skill.validator = "validator/" + id;
  for (const auto& o : trace.header.objects) skill.object_types[o.id] = o.kind;
  return skill;
}

ActionSchema compile_bioperation(const SkillSchema& skill) {
  if (!skill.g_pre) throw SymbolicError("compile_bioperation: skill '" + skill.id + "' has no G_pre");
  const GroundedPredicates pre = predicates_of_graph(*skill.g_pre);

  std::set<Literal> eff_geom;
  std::set<std::string> eff_handles;
  if (skill.g_eff) {
    GroundedPredicates eff = predicates_of_graph(*skill.g_eff, "2");
    // Unchanged payloads keep the precondition's handle.
    std::set<Literal> renamed;
    for (Literal l : eff.literals) {
      const int pi = payload_index(l.predicate);
      if (pi >= 0) {
        for (const auto& p : pre.literals) {
          if (key_of(p) != key_of(l)) continue;
          const Posed& a = pre.values.at(p.args[static_cast<size_t>(pi)]);
          const Posed& b = eff.values.at(l.args[static_cast<size_t>(pi)]);
          if (approx_equal(a, b, 1e-6)) l.args[static_cast<size_t>(pi)] = p.args[static_cast<size_t>(pi)];
        }
      }
      renamed.insert(l);
    }
    eff_geom = diff_effects(pre.literals, renamed);
  }

  const auto entity_kind = [&](const std::string& id) -> std::optional<EntityKind> {
    for (const auto& e : skill.g_pre->entities)
      if (e.id == id) return e.kind;
    return std::nullopt;
  };

  std::set<std::string> objects, grippers, regions;
  std::vector<std::string> q_pre, q_eff, g_pre, g_eff, p_all;
  const auto note = [&](const Literal& l) {
    const int pi = payload_index(l.predicate);
    for (size_t i = 0; i < l.args.size(); ++i) {
      const std::string& a = l.args[i];
      if (static_cast<int>(i) == pi) {
        auto push = [&](std::vector<std::string>& v) {
          if (std::find(v.begin(), v.end(), a) == v.end()) v.push_back(a);
        };
        if (a.rfind("q2", 0) == 0) push(q_eff);
        else if (a.rfind("q", 0) == 0) push(q_pre);
        else if (a.rfind("g2", 0) == 0) push(g_eff);
        else if (a.rfind("g", 0) == 0) push(g_pre);
        else push(p_all);
        continue;
      }
      const auto k = entity_kind(a);
      if (!k) throw SymbolicError("compile_bioperation: unknown entity '" + a + "'");
      if (*k == EntityKind::Object) objects.insert(a);
      else if (*k == EntityKind::Gripper) grippers.insert(a);
      else regions.insert(a);
    }
  };
  for (const auto& l : pre.literals) note(l);
  for (const auto& l : eff_geom) note(l);
  for (auto* v : {&q_pre, &q_eff, &g_pre, &g_eff, &p_all}) std::sort(v->begin(), v->end());

  const auto var = [](const std::string& c) { return "?" + c; };
  const auto lift = [&](Literal l) {
    for (auto& a : l.args) a = var(a);
    return l;
  };

  ActionSchema act;
  act.name = "BiOperation-" + skill.id;
  const std::string skill_var = "?a";
  act.params.push_back({skill_var, skill.id + "-skill"});
  for (const auto& o : objects) {
    auto it = skill.object_types.find(o);
    act.params.push_back({var(o), it == skill.object_types.end() ? "obj" : it->second});
  }
  for (const auto& h : grippers) act.params.push_back({var(h), h == "h_l" ? "left-arm" : h == "h_r" ? "right-arm" : "arm"});
  for (const auto& r : regions) act.params.push_back({var(r), "region"});
  for (const auto& q : q_pre) act.params.push_back({var(q), "conf"});
  for (const auto& q : q_eff) act.params.push_back({var(q), "conf"});
  for (const auto& g : g_pre) act.params.push_back({var(g), "grasp"});
  for (const auto& g : g_eff) act.params.push_back({var(g), "grasp"});
  for (const auto& p : p_all) act.params.push_back({var(p), "pose"});

  for (const auto& l : pre.literals) act.pre.push_back(lift(l));
  for (const auto& l : eff_geom) act.eff.push_back(lift(l));
  act.eff.push_back(Literal("DoneBiOp", {skill_var}));

  const std::string ql = "q_h_l", qr = "q_h_r";
  const auto has = [](const std::vector<std::string>& v, const std::string& x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  if (!has(q_pre, ql) || !has(q_pre, qr)) throw SymbolicError("compile_bioperation: G_pre must place both grippers");
  act.con.push_back(Literal("SafeBiOp", {skill_var, "?h_l", "?h_r", var(ql), var(qr)}));
  if (has(q_eff, "q2_h_l") && has(q_eff, "q2_h_r"))
    act.con.push_back(Literal("BiConf", {skill_var, var(ql), var(qr), "?q2_h_l", "?q2_h_r"}));
  return act;
}

void validate_action(const Domain& domain, const ActionSchema& action) {
  std::map<std::string, std::string> params;
  for (const auto& p : action.params) {
    if (!domain.has_type(p.type)) throw SymbolicError(action.name + ": undeclared type '" + p.type + "'");
    params[p.name] = p.type;
  }
  const auto check = [&](const Literal& l) {
    const PredicateDecl* decl = domain.predicate(l.predicate);
    if (!decl) throw SymbolicError(action.name + ": undeclared predicate '" + l.predicate + "'");
    if (decl->params.size() != l.args.size())
      throw SymbolicError(action.name + ": arity mismatch for '" + l.predicate + "'");
    for (size_t i = 0; i < l.args.size(); ++i) {
      if (!is_variable(l.args[i])) continue;
      auto it = params.find(l.args[i]);
      if (it == params.end()) throw SymbolicError(action.name + ": free variable " + l.args[i]);
      if (!domain.is_subtype(it->second, decl->params[i].type))
        throw SymbolicError(action.name + ": " + l.args[i] + " of type " + it->second + " used as " + decl->params[i].type);
    }
  };
  for (const auto& l : action.pre) check(l);
  for (const auto& l : action.eff) check(l);
  for (const auto& l : action.con) check(l);
}

}  // namespace svip
