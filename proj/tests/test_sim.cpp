#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "svip/json_io.hpp"
#include "svip/sim.hpp"

using namespace svip;
namespace sc = sim_constants;
namespace wc = world_constants;

namespace {

struct Range {
  double lo = 1e9, hi = -1e9;
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

bool has_edge(const SceneGraph& g, const std::string& src, const std::string& dst, const std::string& label) {
  for (const auto& e : g.edges)
    if (e.src == src && e.dst == dst && e.label == label) return true;
  return false;
}

const std::vector<DemoTrace>& insertion_demos() {
  static const auto d = scripted_demos("insertion", 20, 5);
  return d;
}

WorldState start_state(const DemoTrace& tr) {
  const EventSequence seq = segment(tr);
  return tr.state_at(policy_start_step(tr, seq, seq.contact_rich.front()));
}

}  // namespace

TEST_CASE("scenarios are deterministic and names are checked") {
  const Scenario a = sample_scenario("ID", 7), b = sample_scenario("ID", 7);
  CHECK(world_to_json(a.world) == world_to_json(b.world));
  CHECK(world_to_json(sample_scenario("ID", 8).world) != world_to_json(a.world));
  CHECK_THROWS_AS(sample_scenario("nope", 1), std::invalid_argument);
  for (const auto& n : scenario_names()) CHECK_NOTHROW(sample_scenario(n, 3));
}

TEST_CASE("scenario ranges over 10^4 draws") {
  const double w_id = 2 * sc::kIdHalf, w_ood = 2 * sc::kXyOodHalf;
  Range sx, sy, px, py, ys, yp;
  Range idx, idy;
  double id_yaw = 0.0;
  for (uint64_t s = 0; s < 10000; ++s) {
    const WorldState w = sample_scenario("XYH-OOD", s).world;
    const Posed so = w.object("socket").pose, po = w.object("peg").pose;
    sx.add(so.translation.x() - sc::kSocketCentre.x());
    sy.add(so.translation.y() - sc::kSocketCentre.y());
    px.add(po.translation.x() - sc::kPegCentre.x());
    py.add(po.translation.y() - sc::kPegCentre.y());
    ys.add(so.yaw());
    yp.add(po.yaw());
    const WorldState v = sample_scenario("ID", s).world;
    idx.add(v.object("socket").pose.translation.x() - sc::kSocketCentre.x());
    idy.add(v.object("peg").pose.translation.y() - sc::kPegCentre.y());
    id_yaw = std::max({id_yaw, std::abs(v.object("socket").pose.yaw()), std::abs(v.object("peg").pose.yaw())});
  }
  for (const Range& r : {sx, sy, px, py}) {
    CHECK(r.lo >= -sc::kXyOodHalf);
    CHECK(r.hi <= sc::kXyOodHalf);
    CHECK(r.hi - r.lo >= 0.95 * w_ood);
  }
  for (const Range& r : {ys, yp}) {
    CHECK(r.lo > -0.5 * M_PI);
    CHECK(r.hi < 0.5 * M_PI);
    CHECK(r.hi - r.lo >= 0.95 * M_PI);
  }
  for (const Range& r : {idx, idy}) {
    CHECK(r.lo >= -sc::kIdHalf);
    CHECK(r.hi <= sc::kIdHalf);
    CHECK(r.hi - r.lo >= 0.95 * w_id);
  }
  CHECK(id_yaw == 0.0);
}

TEST_CASE("unsafe and unreachable scenarios") {
  for (uint64_t s = 0; s < 200; ++s) {
    const WorldState u = sample_scenario("unsafe", s).world;
    REQUIRE(u.find_object("pole") != nullptr);
    CHECK(u.object("pole").shape.is_disk());
    const Vec2d so = u.object("socket").pose.xy() - sc::kSocketCentre, po = u.object("peg").pose.xy() - sc::kPegCentre;
    CHECK(so.cwiseAbs().maxCoeff() <= sc::kIdHalf);
    CHECK(po.cwiseAbs().maxCoeff() <= sc::kIdHalf);

    const WorldState r = sample_scenario("unreachable", s).world;
    const double side = r.object("socket").pose.translation.x() > 0 ? 1.0 : -1.0;
    CHECK(r.object("peg").pose.translation.x() * side > 0.0);
    // The far arm cannot reach either object.
    const ArmState& far = side > 0 ? r.arms[0] : r.arms[1];
    CHECK_FALSE(test_reachable(far, r.object("socket").pose.xy()));
    CHECK_FALSE(test_reachable(far, r.object("peg").pose.xy()));
  }
}

TEST_CASE("reachability is inclusive at the boundary") {
  ArmState a;
  a.base = Vec2d::Zero();
  a.reach = 0.5;
  CHECK(test_reachable(a, Vec2d(0.3, 0.4)));
  CHECK_FALSE(test_reachable(a, Vec2d(0.3, 0.40001)));
}

TEST_CASE("pick makes AtGrasp appear") {
  WorldState w = make_desk();
  w.objects.push_back(make_socket("socket", Posed::planar(-0.2, 0.0, 0.0)));
  CHECK_FALSE(has_edge(graph_of_state(w), "h_l", "socket", labels::AtGrasp));
  exec_move(w, "h_l", compose(w.object("socket").pose, nominal_grasp("socket")));
  exec_pick(w, "h_l", "socket");
  CHECK(w.arm("h_l").held == std::optional<std::string>("socket"));
  CHECK(has_edge(graph_of_state(w), "h_l", "socket", labels::AtGrasp));
  // Picking with an empty hand far from any object fails.
  CHECK_THROWS_AS(exec_pick(w, "h_r", "socket"), SimError);
}

TEST_CASE("place into the bin yields In") {
  WorldState w = sample_scenario("table-to-bin", 4).world;
  const Region* bin = w.find_region("bin");
  REQUIRE(bin != nullptr);
  const ObjectState& b0 = w.object("block0");
  const std::string arm = test_reachable(w.arm("h_l"), b0.pose.xy()) ? "h_l" : "h_r";
  const Posed g = nominal_grasp(b0.kind);
  exec_move(w, arm, compose(b0.pose, g));
  exec_pick(w, arm, "block0");
  exec_place(w, arm, compose(Posed::planar(bin->rect.center.x(), bin->rect.center.y(), 0.0), g));
  CHECK_FALSE(w.arm(arm).held.has_value());
  CHECK(footprint_contains(bin->rect.footprint(), w.object("block0").footprint(), 1e-9));
  CHECK(has_edge(graph_of_state(w), "bin", "block0", labels::AtRelativePose));
}

TEST_CASE("moving out of reach is an error") {
  WorldState w = make_desk();
  CHECK_THROWS_AS(exec_move(w, "h_l", Posed::planar(0.4, 0.0, 0.0)), ReachError);
  CHECK_THROWS_AS(exec_primitive(w, Primitive{"fly", "h_l", "", {}, {}}), SimError);
}

TEST_CASE("primitive replay is deterministic") {
  auto run = [] {
    WorldState w = sample_scenario("ID", 11).world;
    TraceRecorder log;
    exec_move(w, "h_l", compose(w.object("socket").pose, nominal_grasp("socket")), &log);
    exec_pick(w, "h_l", "socket", &log);
    exec_move(w, "h_r", compose(w.object("peg").pose, nominal_grasp("peg")), &log);
    exec_pick(w, "h_r", "peg", &log);
    exec_approach(w, Posed::planar(-0.17, 0.0, 0.0, 0.05), Posed::planar(0.17, 0.0, M_PI, 0.05), &log);
    exec_retreat(w, &log);
    return std::make_pair(world_to_json(w).dump(), log.steps().size());
  };
  CHECK(run() == run());
}

TEST_CASE("holding consistency along scripted demos") {
  for (const auto& tr : insertion_demos()) {
    std::map<std::string, Posed> offset;  // per object, while held
    for (size_t i = 0; i < tr.size(); ++i) {
      const WorldState w = tr.state_at(i);
      for (const auto& a : w.arms) {
        if (!a.held) {
          std::erase_if(offset, [&](const auto& kv) { return kv.first.ends_with("@" + a.id); });
          continue;
        }
        const Posed rel = compose(a.gripper.inverse(), w.object(*a.held).pose);
        auto [it, fresh] = offset.emplace(*a.held + "@" + a.id, rel);
        if (!fresh) {
          CHECK((it->second.translation - rel.translation).norm() < 1e-9);
          CHECK(it->second.rotation.angularDistance(rel.rotation) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("scripted demos") {
  CHECK(scripted_demos("insertion", 0, 1).empty());
  const auto ins = scripted_demos("insertion", 50, 2);
  CHECK(ins.size() == 50);
  for (const auto& tr : ins) CHECK(segment(tr).contact_rich.size() == 1);
  const auto hand = scripted_demos("handoff", 20, 2);
  CHECK(hand.size() == 20);
  for (const auto& tr : hand) {
    const EventSequence seq = segment(tr);
    REQUIRE(seq.contact_rich.size() == 1);
    CHECK(seq.contact_rich.front().eff.has_value());
  }
  for (const auto& t : demo_tasks()) CHECK(scripted_demos(t, 2, 3).size() == 2);
  CHECK_THROWS_AS(scripted_demos("juggling", 1, 1), std::invalid_argument);
}

TEST_CASE("synthetic clouds") {
  WorldState w = make_desk();
  w.objects.push_back(make_pole("pole", Posed::planar(0.1, -0.05, 0.0)));
  const ObjectState& pole = w.object("pole");
  const PointCloudd c = synth_cloud(w, "pole", 3, 0.0);
  REQUIRE(c.size() == 256);
  for (Eigen::Index i = 0; i < c.points.cols(); ++i) {
    const Vec3d p = c.points.col(i);
    const Vec2d d = p.head<2>() - pole.pose.xy();
    const double top = pole.height * (1.0 + pole.taper * d.x() / pole.shape.radius);
    const bool side = std::abs(d.norm() - pole.shape.radius) < 1e-9 && p.z() >= -1e-9 && p.z() <= top + 1e-9;
    const bool lid = d.norm() <= pole.shape.radius + 1e-9 && std::abs(p.z() - top) < 1e-9;
    CHECK((side || lid));
  }

  // Moving the object moves its cloud.
  const Posed t = Posed::planar(0.2, 0.1, 0.7);
  WorldState m = w;
  m.object("pole").pose = compose(t, pole.pose);
  const PointCloudd a = synth_cloud(w, "pole", 9), b = synth_cloud(m, "pole", 9);
  CHECK((transform_cloud(t, a).points - b.points).cwiseAbs().maxCoeff() < 1e-9);

  w.objects.push_back(make_socket("socket", Posed::planar(-0.2, 0.0, 0.4)));
  const PointCloudd o = synth_cloud(w, "socket", 5, 0.002, true);
  CHECK(o.size() <= static_cast<Eigen::Index>(0.6 * 256));
  CHECK(o.size() > 0);
}

TEST_CASE("distance oracle") {
  const Footprint grip = Footprint::disk(wc::kGripperRadius);
  const Footprint obstacle = Footprint::disk(0.02);
  // Stationary arm 0.5 m from the obstacle.
  std::vector<std::vector<Footprint>> still(3, {grip.placed(Posed::planar(0.0, 0.0, 0.0))});
  CHECK(min_distance_oracle(still, obstacle.placed(Posed::planar(0.5, 0.0, 0.0))) == doctest::Approx(0.45).epsilon(1e-12));
  // Coincident with a waypoint.
  CHECK(min_distance_oracle(still, obstacle.placed(Posed::planar(0.0, 0.0, 0.0))) == 0.0);
  // Straight pass above the obstacle: closest at the midpoint, between waypoints.
  std::vector<std::vector<Footprint>> pass{{grip.placed(Posed::planar(-0.2, 0.1, 0.0))}, {grip.placed(Posed::planar(0.2, 0.1, 0.0))}};
  CHECK(min_distance_oracle(pass, obstacle.placed(Posed::identity())) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(min_distance_oracle({}, obstacle) == std::numeric_limits<double>::infinity());
}

TEST_CASE("policy emulator gating") {
  const auto& demos = insertion_demos();
  const PolicyEmulator em = PolicyEmulator::fit("insert", demos);
  CHECK(em.left_object == "socket");
  CHECK(em.right_object == "peg");
  CHECK(em.radius > 0.0);

  // Exactly a training start.
  WorldState w = start_state(demos[3]);
  double d = -1.0;
  CHECK(em.nearest(em.start_of(w), &d) == 3);
  CHECK(d < 1e-12);
  WorldState w1 = w, w2 = w;
  const PolicyOutcome ok = em.execute(w1);
  CHECK(ok.success);
  CHECK(ok.reason.empty());
  CHECK(em.execute(w2).success);
  CHECK(world_to_json(w1) == world_to_json(w2));

  // Displaced 0.2 m beyond the support.
  WorldState far = w;
  for (auto& a : far.arms) a.gripper = compose(Posed::translate(0.0, 0.2 + em.radius), a.gripper);
  far.sync_held();
  const PolicyOutcome out = em.execute(far);
  CHECK_FALSE(out.success);
  CHECK(out.reason == "out-of-support");

  // In support, but a pole on the coordinated path.
  WorldState blocked = w;
  const Vec2d mid = 0.5 * (w.object("socket").pose.xy() + w.object("peg").pose.xy());
  blocked.objects.push_back(make_pole("pole", Posed::planar(mid.x(), mid.y(), 0.0)));
  const PolicyOutcome hit = em.execute(blocked);
  CHECK_FALSE(hit.success);
  CHECK(hit.reason.rfind("collision", 0) == 0);

  // Not holding the objects.
  WorldState raw = demos[0].state_at(0);
  CHECK(em.execute(raw).reason == "precondition");

  const PolicyEmulator back = PolicyEmulator::from_json(Json::parse(em.to_json().dump()));
  CHECK(back.radius == em.radius);
  WorldState w3 = w;
  CHECK(back.execute(w3).success);
}

TEST_CASE("raw emulator gating") {
  const auto& demos = insertion_demos();
  const PolicyEmulator em = PolicyEmulator::fit("insert", demos);
  // A demonstrated initial state lies in the raw support.
  WorldState w = demos[2].state_at(0);
  CHECK(em.raw_in_support(w.object("socket").pose, w.object("peg").pose));
  // A turned peg does not.
  CHECK_FALSE(em.raw_in_support(w.object("socket").pose, compose(w.object("peg").pose, Posed::planar(0, 0, 0.5))));
  // Nor a socket outside the demonstrated square.
  CHECK_FALSE(em.raw_in_support(Posed::planar(-0.2, 0.2, 0.0), w.object("peg").pose));
  WorldState r = demos[2].state_at(0);
  const PolicyOutcome out = em.execute_raw(r);
  CHECK(out.success);
  CHECK(out.support_distance == 0.0);
}
