#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "svip/symbolic.hpp"

using namespace svip;

namespace {

std::set<std::string> strings(const std::vector<Literal>& ls) {
  std::set<std::string> out;
  for (const auto& l : ls) out.insert(l.to_string());
  return out;
}

std::set<std::string> strings(const std::set<Literal>& ls) { return strings(std::vector<Literal>(ls.begin(), ls.end())); }

}  // namespace

TEST_CASE("Pr(G) for the handoff pre graph") {
  const auto h = fixtures::handoff(300, 120, 210, 240);
  const auto seq = segment(h.trace);
  const auto pre = predicates_of_graph(seq.keyframes[1].graph);
  CHECK(strings(pre.literals) == std::set<std::string>{"(AtGrasp h_r o1 g_o1)", "(AtConf h_l q_h_l)", "(AtConf h_r q_h_r)"});
  CHECK(pre.values.size() == 3);
  CHECK(approx_equal(pre.values.at("q_h_r"), h.trace.steps[seq.keyframes[1].step].grippers.at("h_r").pose, 1e-12));
}

TEST_CASE("Pr(G) basics") {
  WorldState w = make_desk();
  const auto empty = predicates_of_graph(graph_of_state(w));
  CHECK(strings(empty.literals) == std::set<std::string>{"(AtConf h_l q_h_l)", "(AtConf h_r q_h_r)"});

  w.objects.push_back(fixtures::bar("o2", Posed::planar(0.3, 0.2, 0.0)));
  w.regions.push_back({"bin", Rect{Vec2d(0.3, 0.2), Vec2d(0.06, 0.06)}});
  const auto g = graph_of_state(w);
  const auto lits = predicates_of_graph(g, "2");
  CHECK(lits.literals.count(Literal("AtRelativePose", {"bin", "o2", "p2_o2"})));
  CHECK(lits.literals.size() == g.edges.size());

  SceneGraph bad;
  bad.add_edge({"a", "b", "Hover", Posed()});
  CHECK_THROWS_AS(predicates_of_graph(bad), SymbolicError);
}

TEST_CASE("diff_effects") {
  const auto h = fixtures::handoff(300, 120, 210, 240);
  const auto seq = segment(h.trace);
  const auto pre = predicates_of_graph(seq.keyframes[1].graph).literals;
  const auto eff = predicates_of_graph(seq.keyframes[3].graph, "2").literals;
  CHECK(strings(diff_effects(pre, eff)) ==
        std::set<std::string>{"(AtGrasp h_l o1 g2_o1)", "(not (AtGrasp h_r o1 g_o1))", "(AtConf h_l q2_h_l)", "(AtConf h_r q2_h_r)"});
  CHECK(diff_effects(pre, pre).empty());
  CHECK(diff_effects(eff, eff).empty());
}

TEST_CASE("diff_effects antisymmetry on non-functional literals") {
  // Contact is not functional, so swapping pre/eff flips every polarity.
  std::mt19937_64 rng(5);
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  for (int trial = 0; trial < 50; ++trial) {
    std::set<Literal> A, B;
    for (size_t i = 0; i < ids.size(); ++i)
      for (size_t j = i + 1; j < ids.size(); ++j) {
        if (rng() % 2) A.insert(Literal("Contact", {ids[i], ids[j]}));
        if (rng() % 2) B.insert(Literal("Contact", {ids[i], ids[j]}));
      }
    std::set<Literal> flipped;
    for (const auto& l : diff_effects(A, B)) flipped.insert(l.flipped());
    CHECK(flipped == diff_effects(B, A));
  }
}

TEST_CASE("compile the handoff BiOperation") {
  const auto h = fixtures::handoff(300, 120, 210, 240);
  const auto seq = segment(h.trace);
  const SkillSchema skill = skill_from_segment("handoff", h.trace, seq);
  const ActionSchema act = compile_bioperation(skill);
  CHECK(act.name == "BiOperation-handoff");
  CHECK(act.params.size() == 10);
  CHECK(strings(act.pre) == std::set<std::string>{"(AtGrasp ?h_r ?o1 ?g_o1)", "(AtConf ?h_l ?q_h_l)", "(AtConf ?h_r ?q_h_r)"});
  CHECK(strings(act.eff) == std::set<std::string>{"(AtGrasp ?h_l ?o1 ?g2_o1)", "(not (AtGrasp ?h_r ?o1 ?g_o1))",
                                                  "(AtConf ?h_l ?q2_h_l)", "(AtConf ?h_r ?q2_h_r)", "(DoneBiOp ?a)"});
  CHECK(act.con.front().to_string() == "(SafeBiOp ?a ?h_l ?h_r ?q_h_l ?q_h_r)");

  Domain d = bioperation_base_domain();
  d.types.emplace_back("handoff-skill", "skill");
  d.types.emplace_back("bar", "obj");
  CHECK_NOTHROW(validate_action(d, act));
}

TEST_CASE("skill ending contact-rich only asserts DoneBiOp") {
  const auto ins = fixtures::insertion(200, 20, 40, 150);
  const auto seq = segment(ins.trace);
  const SkillSchema skill = skill_from_segment("insert", ins.trace, seq);
  CHECK_FALSE(skill.g_eff.has_value());
  const ActionSchema act = compile_bioperation(skill);
  CHECK(strings(act.eff) == std::set<std::string>{"(DoneBiOp ?a)"});
  CHECK(act.pre.size() == 4);
  CHECK(act.con.size() == 1);
}

TEST_CASE("distinct skills give distinct actions") {
  const auto h = fixtures::handoff(300, 120, 210, 240);
  const auto seq = segment(h.trace);
  const auto a = compile_bioperation(skill_from_segment("s0", h.trace, seq));
  const auto b = compile_bioperation(skill_from_segment("s1", h.trace, seq));
  CHECK(a.name != b.name);
  CHECK(a.params[0].type != b.params[0].type);
}

TEST_CASE("compile errors") {
  SkillSchema s;
  s.id = "x";
  CHECK_THROWS_AS(compile_bioperation(s), SymbolicError);
  const auto h = fixtures::handoff(300, 120, 210, 240);
  const auto seq = segment(h.trace);
  CHECK_THROWS_AS(skill_from_segment("x", h.trace, seq, 3), SymbolicError);
}

TEST_CASE("validate_action rejects bad schemas") {
  const Domain d = bioperation_base_domain();
  ActionSchema a;
  a.name = "bad";
  a.params = {{"?h", "arm"}, {"?q", "conf"}};
  a.pre = {Literal("AtConf", {"?h", "?q"})};
  CHECK_NOTHROW(validate_action(d, a));
  a.eff = {Literal("AtConf", {"?h", "?z"})};
  CHECK_THROWS_AS(validate_action(d, a), SymbolicError);
  a.eff = {Literal("AtConf", {"?q", "?h"})};
  CHECK_THROWS_AS(validate_action(d, a), SymbolicError);
  a.eff = {Literal("Nope", {"?h"})};
  CHECK_THROWS_AS(validate_action(d, a), SymbolicError);
}

TEST_CASE("unchanged payloads reuse the precondition handle") {
  // An effect graph identical to the precondition graph adds nothing.
  const auto h = fixtures::handoff(300, 120, 210, 240);
  const auto seq = segment(h.trace);
  SkillSchema s = skill_from_segment("h", h.trace, seq);
  s.g_eff = *s.g_pre;
  const auto act = compile_bioperation(s);
  CHECK(strings(act.eff) == std::set<std::string>{"(DoneBiOp ?a)"});
}
