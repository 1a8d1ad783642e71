#include "svip/pipeline.hpp"

#include <algorithm>
#include <ostream>
#include <random>

#include "svip/pddl.hpp"

namespace svip {

namespace {

size_t grasp_event(const EventSequence& seq, const std::string& o) {
  auto held = [&](const SceneGraph& g) {
    for (const auto& e : g.edges)
      if (e.label == labels::AtGrasp && e.dst == o) return true;
    return false;
  };
  for (size_t k = 1; k < seq.keyframes.size(); ++k)
    if (held(seq.keyframes[k].graph) && !held(seq.keyframes[k - 1].graph)) return k;
  throw SimError("demo never grasps '" + o + "'");
}

Posed value_of(const ValueTable& v, const std::string& h) {
  auto it = v.find(h);
  if (it == v.end()) throw SimError("no value bound to handle '" + h + "'");
  return it->second;
}

}  // namespace

bool insertion_done(const WorldState& w) {
  const ObjectState* s = w.find_object("socket");
  const ObjectState* p = w.find_object("peg");
  return s && p && footprint_contains(s->footprint(), p->footprint(), 1e-6);
}

SkillData extract_skill_data(const std::vector<DemoTrace>& demos) {
  SkillData out;
  for (const auto& tr : demos) {
    const EventSequence seq = segment(tr);
    if (seq.contact_rich.empty()) throw SimError("demo has no contact-rich segment");
    const ContactRichSpan& span = seq.contact_rich.front();
    const size_t s = policy_start_step(tr, seq, span);
    const WorldState w = tr.state_at(s);
    const ArmState& l = w.arms.at(0);
    const ArmState& r = w.arms.at(1);
    if (!l.held || !r.held) throw SimError("both grippers must hold an object at the policy start");
    if (out.left_object.empty()) {
      out.left_object = *l.held;
      out.right_object = *r.held;
    }
    const TraceStep& eff = span.eff ? tr.steps[seq.keyframes[*span.eff].step] : tr.steps.back();
    BimanualConfig q;
    q.pre_l = l.gripper;
    q.pre_r = r.gripper;
    q.eff_l = eff.grippers.at(l.id).pose;
    q.eff_r = eff.grippers.at(r.id).pose;
    out.configs.push_back(q);
    for (const std::string& o : {out.left_object, out.right_object}) {
      const ObjectCentricTrajectory oc = extract_grasp(tr, o, grasp_event(seq, o), seq);
      const Posed init = tr.steps.front().objects.at(o);
      TrajectorySample ts;
      ts.cloud = tr.steps.front().clouds.at(o);
      for (const Posed& rel : resample_trajectory(oc.poses, kWaypoints)) ts.trajectory.push_back(compose(init, rel));
      out.trajectories[o].push_back(std::move(ts));
    }
  }
  return out;
}

InsertionSystem train_insertion_system(const std::vector<DemoTrace>& demos, const Domain& base, const TrainOptions& opt,
                                       std::ostream* log) {
  if (demos.empty()) throw SimError("no demonstrations to train on");
  InsertionSystem sys;
  const EventSequence seq = segment(demos.front());
  const SkillSchema skill = skill_from_segment(sys.skill_id, demos.front(), seq, 0);
  sys.domain = base;
  const ActionSchema act = compile_bioperation(skill);
  validate_action(sys.domain, act);
  sys.domain.actions.push_back(act);

  const SkillData data = extract_skill_data(demos);
  DiffusionParams cp = opt.config_params;
  cp.seed = derive_seed(opt.seed, "q");
  sys.generators.config = train_config_generator(data.configs, cp);
  if (log) *log << "trained configuration generator on " << data.configs.size() << " samples\n";
  for (const auto& [o, samples] : data.trajectories) {
    DiffusionParams tp = opt.traj_params;
    tp.seed = derive_seed(opt.seed, "tau/" + o);
    sys.generators.trajectories[o] = train_traj_generator(samples, tp);
    if (log) *log << "trained trajectory generator for " << o << '\n';
  }

  const ObjectState obstacle = make_pole("pole", Posed::identity());
  const auto samples = build_collision_dataset(demos, opt.grid, obstacle, opt.t_samples, opt.seed);
  ValidatorParams vp = opt.validator;
  vp.seed = derive_seed(opt.seed, "validator");
  ValidatorFit fit = train_validator(samples, vp);
  sys.validator = std::move(fit.model);
  sys.validator_holdout_mae = fit.holdout_mae;
  if (log) *log << "trained validator on " << samples.size() << " samples, holdout MAE " << fit.holdout_mae << '\n';

  sys.emulator = PolicyEmulator::fit(sys.skill_id, demos);
  return sys;
}

Json InsertionSystem::to_json() const {
  return {{"format", "svip-system"},
          {"version", 1},
          {"skill", skill_id},
          {"domain", serialize(domain)},
          {"generators", generators.to_json()},
          {"validator", validator.to_json()},
          {"validator_holdout_mae", validator_holdout_mae},
          {"emulator", emulator.to_json()}};
}

InsertionSystem InsertionSystem::from_json(const Json& j) {
  if (j.value("format", "") != "svip-system") throw ModelError("not an svip-system file");
  if (j.value("version", 0) != 1) throw ModelError("unsupported svip-system version");
  InsertionSystem s;
  s.skill_id = j.at("skill").get<std::string>();
  s.domain = parse_domain(j.at("domain").get<std::string>());
  s.generators = SkillGenerators::from_json(j.at("generators"));
  s.validator = ValidatorModel::from_json(j.at("validator"));
  s.validator_holdout_mae = j.value("validator_holdout_mae", 0.0);
  s.emulator = PolicyEmulator::from_json(j.at("emulator"));
  return s;
}

Problem make_problem(const InsertionSystem& sys, const WorldState& w) {
  Problem p;
  p.name = "desk";
  p.domain = sys.domain.name;
  p.objects.push_back({sys.skill_id, sys.skill_id + "-skill"});
  p.init.emplace_back("Skill", std::vector<std::string>{sys.skill_id});
  for (size_t k = 0; k < w.arms.size(); ++k) {
    const ArmState& a = w.arms[k];
    p.objects.push_back({a.id, k == 0 ? "left-arm" : "right-arm"});
    const std::string q0 = "q0_" + a.id;
    p.objects.push_back({q0, "conf"});
    p.values[q0] = a.gripper;
    for (const char* pred : {"Arm", "HandEmpty", "AtHome"}) p.init.emplace_back(pred, std::vector<std::string>{a.id});
    p.init.emplace_back("AtConf", std::vector<std::string>{a.id, q0});
    p.init.emplace_back("Home", std::vector<std::string>{a.id, q0});
    p.goal.emplace_back("AtHome", std::vector<std::string>{a.id});
  }
  for (const auto& o : w.objects) {
    p.objects.push_back({o.id, sys.domain.has_type(o.kind) ? o.kind : "obj"});
    const std::string p0 = "p0_" + o.id;
    p.objects.push_back({p0, "pose"});
    p.values[p0] = o.pose;
    p.init.emplace_back("Graspable", std::vector<std::string>{o.id});
    p.init.emplace_back("AtPose", std::vector<std::string>{o.id, p0});
    p.init.emplace_back("Pose", std::vector<std::string>{o.id, p0});
  }
  p.goal.emplace(p.goal.begin(), "DoneBiOp", std::vector<std::string>{sys.skill_id});
  return p;
}

StreamRegistry make_streams(const InsertionSystem& sys, const WorldState& w, const StreamOptions& opt) {
  StreamRegistry reg;
  auto clouds = std::make_shared<std::map<std::string, PointCloudd>>();
  for (const auto& [o, gen] : sys.generators.trajectories)
    if (w.find_object(o)) (*clouds)[o] = synth_cloud(w, o, derive_seed(opt.perception_seed, o), opt.cloud_sigma);
  const WorldState world = w;
  const InsertionSystem* s = &sys;
  const std::set<std::string> manipulated{sys.emulator.left_object, sys.emulator.right_object};

  reg.add_generator("gen-grasp", [s, clouds, world](const StreamCall& c) -> std::optional<std::vector<Posed>> {
    const std::string& o = c.inputs.at(0);
    auto it = s->generators.trajectories.find(o);
    if (it == s->generators.trajectories.end()) {
      // No learned factor: a centred top grasp at a random heading.
      std::mt19937_64 rng(c.seed);
      std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
      return std::vector<Posed>{Posed::planar(0.0, 0.0, yaw(rng))};
    }
    const Posed p0 = world.object(o).pose;
    const auto tau = it->second.sample(clouds->at(o), c.seed);
    size_t best = 0;
    for (size_t i = 1; i < tau.size(); ++i)
      if ((tau[i].xy() - p0.xy()).norm() < (tau[best].xy() - p0.xy()).norm()) best = i;
    Posed g = compose(p0.inverse(), tau[best]).planarized();
    g.translation.z() = 0.0;
    return std::vector<Posed>{g};
  });

  reg.add_generator("gen-kin", [world](const StreamCall& c) -> std::optional<std::vector<Posed>> {
    Posed q = compose(value_of(*c.values, c.inputs.at(2)), value_of(*c.values, c.inputs.at(3))).planarized();
    q.translation.z() = 0.0;
    if (!test_reachable(world.arm(c.inputs.at(0)), q.xy())) return std::nullopt;
    return std::vector<Posed>{q};
  });

  reg.add_generator("gen-place", [world](const StreamCall& c) -> std::optional<std::vector<Posed>> {
    const std::string& o = c.inputs.at(0);
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> x(-world.table.half.x(), world.table.half.x()),
        y(-world.table.half.y(), world.table.half.y()), yaw(-M_PI, M_PI);
    ObjectState obj = world.object(o);
    for (int k = 0; k < 200; ++k) {
      obj.pose = Posed::planar(world.table.center.x() + x(rng), world.table.center.y() + y(rng), yaw(rng));
      if (!footprint_contains(world.table.footprint(), obj.footprint(), 1e-9)) continue;
      bool clear = true;
      for (const auto& other : world.objects)
        if (other.id != o && footprint_distance(other.footprint(), obj.footprint()) < 0.03) clear = false;
      if (clear) return std::vector<Posed>{obj.pose};
    }
    return std::nullopt;
  });

  reg.add_test("test-reach", [world](const StreamCall& c) {
    return test_reachable(world.arm(c.inputs.at(0)), value_of(*c.values, c.inputs.at(2)).xy());
  });

  reg.add_generator("gen-switch", [s](const StreamCall& c) -> std::optional<std::vector<Posed>> {
    const BimanualConfig q = s->generators.config.sample(c.seed);
    return q.as_vector();
  });

  const bool use_validator = opt.use_validator;
  reg.add_test("test-safe", [s, world, manipulated, use_validator](const StreamCall& c) {
    if (!use_validator) return true;
    WorldState v = world;
    v.objects.clear();
    for (const auto& f : *c.context) {
      if (f.predicate != "AtPose" || f.args.size() != 2) continue;
      const ObjectState* o = world.find_object(f.args[0]);
      if (!o) continue;
      ObjectState placed = *o;
      placed.pose = value_of(*c.values, f.args[1]);
      v.objects.push_back(placed);
    }
    return test_safe_biop(s->validator, v, value_of(*c.values, c.inputs.at(3)), value_of(*c.values, c.inputs.at(4)),
                          manipulated);
  });
  return reg;
}

TrialResult execute_plan(const InsertionSystem& sys, const Scenario& sc, const Plan& plan, TraceRecorder* log) {
  TrialResult res;
  res.planned = true;
  res.plan_length = plan.length();
  res.report = {{"scenario", sc.name}, {"seed", sc.seed}, {"method", "svip"}};
  WorldState w = sc.world;
  if (log) log->record(w);
  bool policy_ok = false;
  try {
    for (const auto& st : plan.steps) {
      const ActionSchema* a = sys.domain.action(st.action);
      if (!a || a->params.size() != st.args.size()) throw SimError("plan step '" + st.action + "' does not match the domain");
      std::map<std::string, std::string> arg;
      for (size_t k = 0; k < a->params.size(); ++k) arg[a->params[k].name] = st.args[k];
      if (st.action == "move") {
        exec_move(w, arg.at("?h"), value_of(plan.values, arg.at("?q")), log);
      } else if (st.action == "pick") {
        exec_pick(w, arg.at("?h"), arg.at("?o"), log);
      } else if (st.action == "place") {
        res.relocation = true;
        exec_place(w, arg.at("?h"), value_of(plan.values, arg.at("?q")), log);
      } else if (st.action == "approach") {
        exec_approach(w, value_of(plan.values, arg.at("?ql")), value_of(plan.values, arg.at("?qr")), log);
      } else if (st.action == "retreat") {
        exec_retreat(w, log);
      } else if (st.action == "BiOperation-" + sys.skill_id) {
        res.biop_start = w;
        const PolicyOutcome out = sys.emulator.execute(w, log);
        res.report["support_distance"] = out.support_distance;
        if (!out.success) {
          res.reason = "policy: " + out.reason;
          break;
        }
        policy_ok = true;
      } else {
        throw SimError("no primitive for action '" + st.action + "'");
      }
    }
  } catch (const SimError& e) {
    res.reason = std::string("execution: ") + e.what();
  }
  res.success = res.reason.empty() && policy_ok && insertion_done(w);
  if (res.reason.empty() && !res.success) res.reason = "goal-not-reached";
  res.report["success"] = res.success;
  res.report["reason"] = res.reason;
  res.report["relocation"] = res.relocation;
  res.report["plan_length"] = res.plan_length;
  return res;
}

TrialResult run_svip_trial(const InsertionSystem& sys, const Scenario& sc, const SolveConfig& cfg,
                           const StreamOptions& opt) {
  const Problem prob = make_problem(sys, sc.world);
  const StreamRegistry reg = make_streams(sys, sc.world, opt);
  const SolveResult sr = solve(sys.domain, prob, reg, cfg);
  TrialResult res;
  if (sr.ok()) {
    res = execute_plan(sys, sc, *sr.plan);
    res.report["plan"] = plan_to_json(*sr.plan);
  } else {
    res.reason = "plan: " + sr.failure->reason;
    res.report = {{"scenario", sc.name}, {"seed", sc.seed},       {"method", "svip"},
                  {"success", false},    {"reason", res.reason}, {"failure", failure_to_json(*sr.failure)}};
  }
  res.plan_seconds = sr.seconds;
  res.report["plan_seconds"] = sr.seconds;
  return res;
}

TrialResult run_raw_trial(const InsertionSystem& sys, const Scenario& sc) {
  TrialResult res;
  WorldState w = sc.world;
  PolicyOutcome out;
  try {
    out = sys.emulator.execute_raw(w);
  } catch (const SimError& e) {
    out.reason = std::string("execution: ") + e.what();
  }
  res.success = out.success && insertion_done(w);
  res.reason = res.success ? "" : (out.reason.empty() ? "goal-not-reached" : out.reason);
  res.report = {{"scenario", sc.name},  {"seed", sc.seed},       {"method", "raw"},
                {"success", res.success}, {"reason", res.reason}, {"support_distance", out.support_distance}};
  return res;
}

}  // namespace svip
