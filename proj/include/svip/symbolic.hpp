#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svip/geometry.hpp"
#include "svip/scenegraph.hpp"

namespace svip {

/// Predicate applied to arguments. Arguments beginning with '?' are
/// variables; everything else is a constant (entity id or payload handle).
struct Literal {
  std::string predicate;
  std::vector<std::string> args;
  bool negated = false;

  Literal() = default;
  Literal(std::string p, std::vector<std::string> a, bool neg = false)
      : predicate(std::move(p)), args(std::move(a)), negated(neg) {}

  Literal positive() const { return Literal(predicate, args, false); }
  Literal flipped() const { return Literal(predicate, args, !negated); }
  std::string to_string() const;

  auto operator<=>(const Literal&) const = default;
  bool operator==(const Literal&) const = default;
};

inline bool is_variable(std::string_view s) { return !s.empty() && s.front() == '?'; }

struct TypedName {
  std::string name;
  std::string type;
  bool operator==(const TypedName&) const = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<TypedName> params;
  bool operator==(const PredicateDecl&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedName> params;
  std::vector<Literal> pre;
  std::vector<Literal> eff;
  std::vector<Literal> con;  // certified by test streams before the action applies
  bool operator==(const ActionSchema&) const = default;
};

enum class StreamKind { Generator, Test };

struct StreamDecl {
  std::string name;
  StreamKind kind = StreamKind::Generator;
  std::vector<std::string> inputs;
  std::vector<Literal> domain;
  std::vector<std::string> outputs;
  std::vector<Literal> certified;
  std::vector<std::string> context;  // fluent predicates a state-dependent test reads
  bool operator==(const StreamDecl&) const = default;
};

struct Domain {
  std::string name;
  std::vector<std::pair<std::string, std::string>> types;  // (type, parent)
  std::vector<PredicateDecl> predicates;
  std::vector<std::string> functional;  // last argument is a value keyed by the rest
  std::vector<ActionSchema> actions;
  std::vector<StreamDecl> streams;

  const PredicateDecl* predicate(const std::string& name) const;
  const ActionSchema* action(const std::string& name) const;
  const StreamDecl* stream(const std::string& name) const;
  bool is_functional(const std::string& predicate) const;
  bool is_subtype(const std::string& type, const std::string& ancestor) const;
  bool has_type(const std::string& type) const;
  bool operator==(const Domain&) const = default;
};

struct Problem {
  std::string name;
  std::string domain;
  std::vector<TypedName> objects;
  std::vector<Literal> init;
  std::vector<Literal> goal;  // conjunction
  std::map<std::string, Posed> values;

  const TypedName* object(const std::string& name) const;
  bool operator==(const Problem& o) const;
};

class SymbolicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An abstracted bimanual skill: the three scene graphs around a
/// contact-rich segment plus handles for its policy, generator and validator.
struct SkillSchema {
  std::string id;
  std::optional<SceneGraph> g_pre;
  SceneGraph g_mid;
  std::optional<SceneGraph> g_eff;
  std::string policy;
  std::string generator;
  std::string validator;
  std::map<std::string, std::string> object_types;  // object id -> class
};

/// Literals with payload handles and the side table binding them.
struct GroundedPredicates {
  std::set<Literal> literals;
  std::map<std::string, Posed> values;
};

/// Pr(G): one literal per edge. Payload handles are named by role
/// (g_<object>, q_<gripper>, p_<object>) with `prime` appended.
GroundedPredicates predicates_of_graph(const SceneGraph& g, std::string_view prime = "");

/// Position of the payload argument, or -1 when the predicate carries none.
int payload_index(const std::string& predicate);

/// Geometric effect: (eff \ pre) plus negations of removed contact literals
/// whose non-payload key is not re-asserted by eff.
std::set<Literal> diff_effects(const std::set<Literal>& pre, const std::set<Literal>& eff);

/// Declarations every compiled bimanual action refers to.
Domain bioperation_base_domain();

ActionSchema compile_bioperation(const SkillSchema& skill);

/// Build a skill from a segmented demonstration's contact-rich span.
SkillSchema skill_from_segment(const std::string& id, const DemoTrace& trace, const EventSequence& seq, size_t span = 0);

/// Check predicate names, arities, parameter typing and free variables.
void validate_action(const Domain& domain, const ActionSchema& action);

}  // namespace svip
