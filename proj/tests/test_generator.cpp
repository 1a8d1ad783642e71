#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "svip/generator.hpp"
#include "svip/sim.hpp"

using namespace svip;

namespace {

PointCloudd socket_cloud(uint64_t seed, const Posed& pose = Posed::planar(-0.2, 0.05, 0.3)) {
  WorldState w = make_desk();
  w.objects.push_back(make_socket("socket", pose));
  return synth_cloud(w, "socket", seed);
}

// Small synthetic dataset: grasp approaches toward a fixed offset in the
// object frame, observed through noisy clouds at random placements.
std::vector<TrajectorySample> synthetic_grasps(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TrajectorySample> out;
  for (int i = 0; i < n; ++i) {
    const Posed obj = Posed::planar(-0.2 + 0.1 * u(rng), 0.1 * u(rng), 0.5 * u(rng));
    TrajectorySample s;
    s.cloud = socket_cloud(seed * 100 + static_cast<uint64_t>(i), obj);
    const Posed start = Posed::planar(-0.15, 0.12, 0.0, 0.05);
    const Posed grasp = Posed::planar(-0.05, 0.0, 0.0);
    for (int k = 0; k < kWaypoints; ++k) {
      const double a = static_cast<double>(k) / (kWaypoints - 1);
      const Posed rel = Posed::planar((1 - a) * start.translation.x() + a * grasp.translation.x(),
                                      (1 - a) * start.translation.y(), 0.0, (1 - a) * 0.05);
      s.trajectory.push_back(compose(obj, rel));
    }
    out.push_back(std::move(s));
  }
  return out;
}

const TrajectoryGenerator& small_generator() {
  static const TrajectoryGenerator g = [] {
    DiffusionParams p;
    p.iterations = 300;
    p.seed = 5;
    return train_traj_generator(synthetic_grasps(24, 3), p);
  }();
  return g;
}

double max_pose_gap(const std::vector<Posed>& a, const std::vector<Posed>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, (a[i].translation - b[i].translation).norm());
    m = std::max(m, (a[i].matrix() - b[i].matrix()).cwiseAbs().maxCoeff());
  }
  return m;
}

PointCloudd cloud_of(const std::vector<Vec3d>& pts) {
  PointCloudd c;
  c.points.resize(3, static_cast<Eigen::Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) c.points.col(static_cast<Eigen::Index>(i)) = pts[i];
  return c;
}

}  // namespace

TEST_CASE("canonicalize: translation and rotation") {
  const PointCloudd c = socket_cloud(1);
  const CloudEncoding e = canonicalize(c);
  REQUIRE(e.descriptor.size() == kDescriptorDim);

  const Posed t = Posed::translate(0.1, 0.2, 0.0);
  const CloudEncoding et = canonicalize(transform_cloud(t, c));
  CHECK((et.descriptor - e.descriptor).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((et.frame.translation - e.frame.translation - Vec3d(0.1, 0.2, 0.0)).norm() < 1e-9);
  CHECK(std::abs(wrap_angle(et.frame.yaw() - e.frame.yaw())) < 1e-9);

  const Posed r = Posed::planar(0.0, 0.0, M_PI / 2);
  const CloudEncoding er = canonicalize(transform_cloud(r, c));
  CHECK((er.descriptor - e.descriptor).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(wrap_angle(er.frame.yaw() - e.frame.yaw() - M_PI / 2)) < 1e-9);
}

TEST_CASE("canonicalize: unit-square corners") {
  const PointCloudd c = cloud_of({Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(1, 1, 0), Vec3d(0, 1, 0)});
  const CloudEncoding e = canonicalize(c);
  CHECK((e.frame.translation - Vec3d(0.5, 0.5, 0.0)).norm() < 1e-12);
}

TEST_CASE("canonicalize: degenerate clouds") {
  CHECK_THROWS_AS(canonicalize(cloud_of({Vec3d(0, 0, 0), Vec3d(1, 0, 0)})), GeometryError);
  std::vector<Vec3d> line;
  for (int i = 0; i < 10; ++i) line.push_back(Vec3d(0.1 * i, 0.05 * i, 0.0));
  CHECK_THROWS_AS(canonicalize(cloud_of(line)), GeometryError);
  CHECK_THROWS_AS(canonicalize(cloud_of(std::vector<Vec3d>(5, Vec3d(0.3, 0.3, 0.0)))), GeometryError);
}

TEST_CASE("descriptor is permutation invariant") {
  PointCloudd c = socket_cloud(2);
  const CloudEncoding e = canonicalize(c);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(c.points.cols());
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + perm.indices().size(), rng);
    c.points = c.points * perm;
    const CloudEncoding p = canonicalize(c);
    CHECK((p.descriptor - e.descriptor).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((p.frame.translation - e.frame.translation).norm() < 1e-12);
  }
}

TEST_CASE("pose vectors round trip") {
  const Posed p = Posed::planar(0.1, -0.2, 1.2, 0.05);
  const auto v = pose_to_vec(p);
  const Posed back = pose_from_vec(v);
  CHECK((back.translation - p.translation).norm() < 1e-12);
  CHECK((back.matrix() - p.matrix()).norm() < 1e-12);
  const std::vector<Posed> many{p, Posed::identity(), Posed::planar(0.3, 0.0, -2.0)};
  const auto flat = poses_to_vec(many);
  CHECK(flat.size() == 3 * kPoseDim);
  CHECK(poses_from_vec(flat).size() == 3);
}

TEST_CASE("trajectory sampling is equivariant under rigid yaw + translation") {
  const TrajectoryGenerator& g = small_generator();
  const PointCloudd c = socket_cloud(7);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Posed t = Posed::planar(0.4 * u(rng), 0.3 * u(rng), M_PI * u(rng));
    const uint64_t seed = 1000 + static_cast<uint64_t>(i);
    const auto base = g.sample(c, seed);
    const auto moved = g.sample(transform_cloud(t, c), seed);
    std::vector<Posed> expect;
    for (const auto& p : base) expect.push_back(compose(t, p));
    worst = std::max(worst, max_pose_gap(moved, expect));
    for (const auto& p : moved) CHECK((p.matrix().transpose() * p.matrix() - Mat3d::Identity()).norm() < 1e-9);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("sampling is deterministic per seed") {
  const TrajectoryGenerator& g = small_generator();
  const PointCloudd c = socket_cloud(8);
  const auto a = g.sample(c, 3), b = g.sample(c, 3), d = g.sample(c, 4);
  CHECK(max_pose_gap(a, b) == 0.0);
  CHECK(max_pose_gap(a, d) > 0.0);
}

TEST_CASE("joint draw equals independent per-factor draws") {
  DiffusionParams p;
  p.iterations = 200;
  std::vector<BimanualConfig> qs;
  for (int i = 0; i < 24; ++i) {
    const double d = 0.002 * i;
    qs.push_back({Posed::planar(-0.12 + d, 0.0, 0.0, 0.05), Posed::planar(0.12, d, M_PI, 0.05),
                  Posed::planar(-0.1, 0.0, 0.0, 0.05), Posed::planar(0.1, 0.0, M_PI, 0.05)});
  }
  SkillGenerators gens;
  gens.config = train_config_generator(qs, p);
  gens.trajectories["socket"] = small_generator();
  gens.trajectories["peg"] = small_generator();
  const std::map<std::string, PointCloudd> clouds{{"socket", socket_cloud(1)}, {"peg", socket_cloud(2)}};
  for (uint64_t s = 0; s < 100; ++s) {
    const DecisionVars joint = sample_switching_conditions(gens, clouds, s);
    const BimanualConfig q = gens.config.sample(derive_seed(s, "q"));
    const auto qa = joint.q.as_vector(), qb = q.as_vector();
    for (size_t k = 0; k < 4; ++k) {
      CHECK(qa[k].translation == qb[k].translation);
      CHECK(qa[k].rotation.coeffs() == qb[k].rotation.coeffs());
    }
    for (const auto& [o, gen] : gens.trajectories) {
      const auto tau = gen.sample(clouds.at(o), derive_seed(s, "tau/" + o));
      CHECK(max_pose_gap(joint.trajectories.at(o), tau) == 0.0);
    }
  }
  CHECK_THROWS_AS(sample_switching_conditions(gens, {{"socket", socket_cloud(1)}}, 0), ModelError);
}

TEST_CASE("derived seeds separate factors") {
  CHECK(derive_seed(1, "q") == derive_seed(1, "q"));
  CHECK(derive_seed(1, "q") != derive_seed(2, "q"));
  CHECK(derive_seed(1, "q") != derive_seed(1, "tau/peg"));
}

TEST_CASE("sampler streams") {
  int calls = 0;
  SamplerStream<uint64_t> none([&](uint64_t s) { ++calls; return s; }, 0, 9);
  CHECK_FALSE(none.next().has_value());
  CHECK(none.exhausted());
  CHECK(calls == 0);

  SamplerStream<uint64_t> four([](uint64_t s) { return s; }, 4, 9);
  std::set<uint64_t> seen;
  while (auto v = four.next()) seen.insert(*v);
  CHECK(seen.size() == 4);
  CHECK(four.calls() == 4);
  CHECK_FALSE(four.next().has_value());
}

TEST_CASE("training input checks") {
  DiffusionParams p;
  p.iterations = 10;
  CHECK_THROWS_AS(train_traj_generator(synthetic_grasps(5, 1), p), ModelError);
  auto data = synthetic_grasps(20, 1);
  data[3].trajectory.pop_back();
  CHECK_THROWS_AS(train_traj_generator(data, p), ModelError);
}

TEST_CASE("generators serialize exactly") {
  SkillGenerators gens;
  DiffusionParams p;
  p.iterations = 50;
  std::vector<BimanualConfig> qs(20, BimanualConfig{Posed::planar(-0.1, 0, 0), Posed::planar(0.1, 0, M_PI),
                                                    Posed::planar(-0.1, 0, 0), Posed::planar(0.1, 0, M_PI)});
  gens.config = train_config_generator(qs, p);
  gens.trajectories["socket"] = small_generator();
  const SkillGenerators back = SkillGenerators::from_json(Json::parse(gens.to_json().dump()));
  const PointCloudd c = socket_cloud(3);
  CHECK(max_pose_gap(back.trajectories.at("socket").sample(c, 5), gens.trajectories.at("socket").sample(c, 5)) == 0.0);
  CHECK(max_pose_gap(back.config.sample(2).as_vector(), gens.config.sample(2).as_vector()) == 0.0);
}

TEST_CASE("handoff grasps stay within the demonstrated support") {
  const auto demos = scripted_demos("handoff", 40, 17);
  std::vector<TrajectorySample> data;
  std::vector<Posed> grasps;
  for (const auto& tr : demos) {
    const EventSequence seq = segment(tr);
    size_t event = 0;
    for (size_t k = 1; k < seq.keyframes.size() && !event; ++k)
      for (const auto& e : seq.keyframes[k].graph.edges)
        if (e.label == labels::AtGrasp && e.dst == "o1") event = k;
    REQUIRE(event > 0);
    const ObjectCentricTrajectory oc = extract_grasp(tr, "o1", event, seq);
    grasps.push_back(oc.grasp);
    TrajectorySample s;
    s.cloud = tr.steps.front().clouds.at("o1");
    const Posed init = tr.steps.front().objects.at("o1");
    for (const auto& rel : resample_trajectory(oc.poses, kWaypoints)) s.trajectory.push_back(compose(init, rel));
    data.push_back(std::move(s));
  }
  DiffusionParams p;
  p.iterations = 2000;
  p.seed = 1;
  const TrajectoryGenerator g = train_traj_generator(data, p);

  const auto fresh = scripted_demos("handoff", 10, 99);
  int inside = 0;
  for (size_t i = 0; i < fresh.size(); ++i) {
    const Posed obj = fresh[i].steps.front().objects.at("o1");
    const auto tau = g.sample(fresh[i].steps.front().clouds.at("o1"), 500 + i);
    Posed best = compose(obj.inverse(), tau.front());
    for (const auto& w : tau) {
      const Posed rel = compose(obj.inverse(), w);
      if (rel.translation.head<2>().norm() < best.translation.head<2>().norm()) best = rel;
    }
    double nn = 1e9;
    for (const auto& gr : grasps) nn = std::min(nn, (gr.translation.head<2>() - best.translation.head<2>()).norm());
    inside += nn <= 0.03;
  }
  CHECK(inside == static_cast<int>(fresh.size()));
}
