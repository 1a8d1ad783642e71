#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "svip/json_io.hpp"
#include "svip/symbolic.hpp"

namespace svip {

using ValueTable = std::map<std::string, Posed>;
using FactSet = std::set<Literal>;

/// Misconfiguration (undeclared or unregistered streams); distinct from a
/// planning failure.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StreamCall {
  const StreamDecl* decl = nullptr;
  std::vector<std::string> inputs;  // concrete object / handle names
  const ValueTable* values = nullptr;
  uint64_t seed = 0;
  const std::vector<Literal>* context = nullptr;  // state facts of the declared context predicates
};

/// A generator draw may fail (nullopt) without the stream being exhausted.
using GeneratorFn = std::function<std::optional<std::vector<Posed>>(const StreamCall&)>;
using TestFn = std::function<bool(const StreamCall&)>;

class StreamRegistry {
 public:
  void add_generator(const std::string& name, GeneratorFn fn) { gens_[name] = std::move(fn); }
  void add_test(const std::string& name, TestFn fn) { tests_[name] = std::move(fn); }
  const GeneratorFn* generator(const std::string& name) const;
  const TestFn* test(const std::string& name) const;

 private:
  std::map<std::string, GeneratorFn> gens_;
  std::map<std::string, TestFn> tests_;
};

struct SolveConfig {
  double timeout = 60.0;     // seconds, streams included
  int stream_budget = 50;    // draws per stream instance
  int bind_attempts = 6;     // full re-bindings per skeleton
  int max_length = 16;       // skeleton length bound
  size_t node_budget = 5'000'000;
  uint64_t seed = 0;
  std::ostream* trace = nullptr;  // one line per iteration
};

struct PlanStep {
  std::string action;
  std::vector<std::string> args;
  bool operator==(const PlanStep&) const = default;
};

struct Plan {
  std::vector<PlanStep> steps;
  ValueTable values;   // every payload handle the plan mentions
  FactSet certified;   // static facts the plan relies on
  int iterations = 0;

  size_t length() const { return steps.size(); }
};

struct Failure {
  std::string reason;  // timeout | unsatisfiable-skeleton-space | stream-exhaustion
  std::string blamed_stream;
  int iterations = 0;
};

struct SolveResult {
  std::optional<Plan> plan;
  std::optional<Failure> failure;
  double seconds = 0.0;
  bool ok() const { return plan.has_value(); }
};

SolveResult solve(const Domain& domain, const Problem& problem, const StreamRegistry& streams, const SolveConfig& config);

/// Predicates changed by some action effect.
std::set<std::string> fluent_predicates(const Domain& domain);

/// Up to `max_count` skeletons in nondecreasing length over the facts
/// `init ∪ optimistic`. Objects named in `optimistic` but not declared by the
/// problem are treated as placeholders typed by `placeholder_types`.
struct SkeletonQuery {
  FactSet optimistic;
  std::map<std::string, std::string> placeholder_types;
  int max_length = 16;
  size_t node_budget = 5'000'000;
};
std::vector<std::vector<PlanStep>> plan_skeletons(const Domain& domain, const Problem& problem, const SkeletonQuery& q,
                                                  size_t max_count = 1);

/// Replay in the symbolic transition system: preconditions hold stepwise,
/// con facts are in `certified`, and the goal holds at the end. Returns an
/// empty string on success, otherwise the first violation.
std::string validate_plan(const Domain& domain, const Problem& problem, const std::vector<PlanStep>& steps,
                          const FactSet& certified);

Json plan_to_json(const Plan& p);
Plan plan_from_json(const Json& j);
Json failure_to_json(const Failure& f);

}  // namespace svip
