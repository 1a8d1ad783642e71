#include "svip/sim.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "svip/json_io.hpp"

namespace svip {

namespace sc = sim_constants;
namespace wc = world_constants;

namespace {

constexpr int kLiftSteps = 5;

uint64_t mix_seed(uint64_t seed, std::string_view tag) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Posed interp(const Posed& a, const Posed& b, double s) {
  return Posed((1.0 - s) * a.translation + s * b.translation, a.rotation.slerp(s, b.rotation));
}

int steps_between(const Posed& a, const Posed& b) {
  const double d = (b.translation - a.translation).norm();
  const double r = a.rotation.angularDistance(b.rotation);
  return std::max(1, static_cast<int>(std::ceil(std::max(d / sc::kStepLength, r / sc::kStepAngle) - 1e-9)));
}

Posed lifted(const Posed& p, double dz) { return Posed(p.translation + Vec3d(0, 0, dz), p.rotation); }

struct Body {
  Footprint fp;
  double z;
};

std::vector<Body> carried_bodies(const WorldState& s, const ArmState& a) {
  std::vector<Body> out{{Footprint::disk(wc::kGripperRadius).placed(a.gripper), a.gripper.translation.z()}};
  if (a.held) {
    const ObjectState& o = s.object(*a.held);
    out.push_back({o.footprint(), o.pose.translation.z()});
  }
  return out;
}

std::set<std::string> held_objects(const WorldState& s) {
  std::set<std::string> h;
  for (const auto& a : s.arms)
    if (a.held) h.insert(*a.held);
  return h;
}

// A carried body collides with a resting object that is taller than the
// body's underside.
void check_motion(const WorldState& before, const WorldState& after, bool between_arms,
                  const std::set<std::string>& ignore = {}) {
  const std::set<std::string> held = held_objects(after);
  for (size_t k = 0; k < after.arms.size(); ++k) {
    if (!after.arms[k].held) continue;
    const auto b0 = carried_bodies(before, before.arms[k]);
    const auto b1 = carried_bodies(after, after.arms[k]);
    for (size_t i = 0; i < std::min(b0.size(), b1.size()); ++i) {
      const Footprint sw = swept_footprint(b0[i].fp, b1[i].fp);
      const double z = std::min(b0[i].z, b1[i].z);
      for (const auto& o : after.objects) {
        if (held.count(o.id) || ignore.count(o.id) || o.height <= z) continue;
        if (footprint_distance(sw, o.footprint()) <= sc::kPenetrationTol)
          throw CollisionError("'" + after.arms[k].id + "' collides with '" + o.id + "'");
      }
    }
  }
  if (between_arms && after.arms.size() == 2 && after.arms[0].held && after.arms[1].held) {
    const ObjectState& a = after.object(*after.arms[0].held);
    const ObjectState& b = after.object(*after.arms[1].held);
    if (a.id != b.id && footprint_distance(a.footprint(), b.footprint()) <= sc::kPenetrationTol)
      throw CollisionError("carried objects '" + a.id + "' and '" + b.id + "' collide");
  }
}

void require_reach(const ArmState& a, const Posed& target) {
  if (!test_reachable(a, target.xy()))
    throw ReachError("target (" + std::to_string(target.translation.x()) + ", " + std::to_string(target.translation.y()) +
                     ") is out of reach of '" + a.id + "'");
}

// Move any subset of grippers together along straight lines.
void move_grippers(WorldState& s, const std::vector<std::pair<size_t, Posed>>& targets, bool between_arms,
                   TraceRecorder* log) {
  int n = 1;
  std::vector<Posed> from;
  for (const auto& [k, target] : targets) {
    from.push_back(s.arms[k].gripper);
    n = std::max(n, steps_between(s.arms[k].gripper, target));
  }
  for (int i = 1; i <= n; ++i) {
    const WorldState before = s;
    for (size_t j = 0; j < targets.size(); ++j)
      s.arms[targets[j].first].gripper = i == n ? targets[j].second : interp(from[j], targets[j].second, static_cast<double>(i) / n);
    s.sync_held();
    check_motion(before, s, between_arms);
    if (log) log->record(s);
  }
}

size_t arm_index(const WorldState& s, const std::string& id) {
  for (size_t k = 0; k < s.arms.size(); ++k)
    if (s.arms[k].id == id) return k;
  throw SimError("unknown arm '" + id + "'");
}

void vertical(WorldState& s, size_t k, double dz, TraceRecorder* log) {
  const Posed from = s.arms[k].gripper;
  for (int i = 1; i <= kLiftSteps; ++i) {
    s.arms[k].gripper = lifted(from, dz * i / kLiftSteps);
    s.sync_held();
    if (log) log->record(s);
  }
}

double cross2(const Vec2d& a, const Vec2d& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

// ---------------------------------------------------------------------------

ObjectState make_block(const std::string& id, const std::string& kind, const Posed& pose, double hx, double hy) {
  ObjectState o;
  o.id = id;
  o.kind = kind;
  o.shape = Footprint::rectangle(hx, hy);
  o.pose = pose;
  o.height = 0.03;
  o.taper = 0.2;
  return o;
}

ObjectState make_socket(const std::string& id, const Posed& pose) {
  ObjectState o = make_block(id, "socket", pose, 0.06, 0.025);
  o.height = 0.04;
  o.taper = 0.3;
  return o;
}

ObjectState make_peg(const std::string& id, const Posed& pose) {
  ObjectState o = make_block(id, "peg", pose, 0.04, 0.01);
  o.taper = 0.3;
  return o;
}

ObjectState make_pole(const std::string& id, const Posed& pose) {
  ObjectState o;
  o.id = id;
  o.kind = "pole";
  o.shape = Footprint::disk(0.02);
  o.pose = pose;
  o.height = 0.15;
  o.taper = 0.0;
  return o;
}

namespace {
ObjectState make_disk_object(const std::string& id, const std::string& kind, const Posed& pose, double r, double height) {
  ObjectState o = make_pole(id, pose);
  o.kind = kind;
  o.shape = Footprint::disk(r);
  o.height = height;
  return o;
}
}  // namespace

Posed nominal_grasp(const std::string& kind) {
  if (kind == "socket") return Posed::planar(-0.05, 0.0, 0.0);
  if (kind == "peg") return Posed::planar(0.035, 0.0, M_PI);
  if (kind == "case") return Posed::planar(-0.06, 0.0, 0.0);
  if (kind == "screwdriver") return Posed::planar(0.045, 0.0, M_PI);
  if (kind == "cup") return Posed::planar(-0.045, 0.0, 0.0);
  if (kind == "sleeve") return Posed::planar(0.05, 0.0, M_PI);
  if (kind == "bar") return Posed::planar(0.03, 0.0, M_PI);
  return Posed::planar(0.0, 0.0, 0.0);
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"ID",     "XY-OOD",        "XYH-OOD",           "unreachable",
                                              "unsafe", "table-to-bin", "insertion-reconfig", "multi-instruction"};
  return names;
}

namespace {

Posed in_square(std::mt19937_64& rng, const Vec2d& c, double half, double yaw) {
  const double x = uniform(rng, c.x() - half, c.x() + half);
  const double y = uniform(rng, c.y() - half, c.y() + half);
  return Posed::planar(x, y, yaw);
}

bool clear_of(const WorldState& w, const ObjectState& o, double gap) {
  for (const auto& other : w.objects)
    if (other.id != o.id && footprint_distance(other.footprint(), o.footprint()) < gap) return false;
  return w.table.contains(o.pose.xy(), o.shape.bounding_radius());
}

}  // namespace

Scenario sample_scenario(const std::string& name, uint64_t seed) {
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) throw std::invalid_argument("unknown scenario '" + name + "'");
  std::mt19937_64 rng(mix_seed(seed, name));
  Scenario sc{name, seed, make_desk()};
  WorldState& w = sc.world;

  if (name == "ID" || name == "XY-OOD" || name == "XYH-OOD" || name == "unsafe" || name == "insertion-reconfig") {
    const double half = name == "XY-OOD" || name == "XYH-OOD" ? sc::kXyOodHalf : sc::kIdHalf;
    double ys = 0.0, yp = 0.0;
    if (name == "XYH-OOD") {
      ys = uniform(rng, -0.5 * M_PI, 0.5 * M_PI);
      yp = uniform(rng, -0.5 * M_PI, 0.5 * M_PI);
    } else if (name == "insertion-reconfig") {
      ys = wrap_angle(M_PI + uniform(rng, -0.25 * M_PI, 0.25 * M_PI));
    }
    w.objects.push_back(make_socket("socket", in_square(rng, sc::kSocketCentre, half, ys)));
    w.objects.push_back(make_peg("peg", in_square(rng, sc::kPegCentre, half, yp)));
    if (name == "unsafe") w.objects.push_back(make_pole("pole", in_square(rng, Vec2d(0.0, 0.0), 0.03, 0.0)));
  } else if (name == "unreachable") {
    // Both objects out of one arm's reach, on the other arm's half.
    const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      w.objects.clear();
      w.objects.push_back(make_socket("socket", Posed::planar(side * uniform(rng, 0.22, 0.45), uniform(rng, -0.25, 0.25),
                                                              uniform(rng, -M_PI, M_PI))));
      w.objects.push_back(make_peg("peg", Posed::planar(side * uniform(rng, 0.22, 0.45), uniform(rng, -0.25, 0.25),
                                                        uniform(rng, -M_PI, M_PI))));
      if (clear_of(w, w.objects[1], 0.04)) break;
    }
  } else if (name == "table-to-bin") {
    w.regions.push_back({"bin", Rect{Vec2d(0.0, 0.28), Vec2d(0.14, 0.09)}});
    for (int i = 0; i < 3; ++i) {
      for (int attempt = 0; attempt < 1000; ++attempt) {
        ObjectState o = make_block("block" + std::to_string(i), "block",
                                   Posed::planar(uniform(rng, -0.35, 0.35), uniform(rng, -0.3, 0.05), uniform(rng, -M_PI, M_PI)),
                                   0.025, 0.02);
        if (clear_of(w, o, 0.03)) {
          w.objects.push_back(o);
          break;
        }
      }
    }
  } else {  // multi-instruction
    w.regions.push_back({"leftPad", Rect{Vec2d(-0.3, -0.25), Vec2d(0.1, 0.08)}});
    w.regions.push_back({"rightPad", Rect{Vec2d(0.3, -0.25), Vec2d(0.1, 0.08)}});
    w.objects.push_back(make_socket("socket", in_square(rng, sc::kSocketCentre + Vec2d(0, 0.1), sc::kIdHalf * 0.5, 0.0)));
    w.objects.push_back(make_peg("peg", in_square(rng, sc::kPegCentre + Vec2d(0, 0.1), sc::kIdHalf * 0.5, 0.0)));
    w.objects.push_back(make_block("box", "block", in_square(rng, Vec2d(0.0, 0.2), 0.05, 0.0), 0.03, 0.03));
  }
  return sc;
}

// ---------------------------------------------------------------------------

PointCloudd synth_cloud(const WorldState& s, const std::string& id, uint64_t seed, double sigma, bool occlude) {
  const ObjectState& o = s.object(id);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int n = 256, n_side = 64;
  const bool disk = o.shape.is_disk();
  const Vec2d he = o.shape.half_extents();
  const auto top = [&](double x) { return o.height * (1.0 + o.taper * x / std::max(he.x(), 1e-9)); };

  std::vector<Vec3d> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec3d p;
    if (i >= n_side) {
      if (disk) {
        const double r = o.shape.radius * std::sqrt(uniform(rng, 0.0, 1.0)), a = uniform(rng, -M_PI, M_PI);
        p = Vec3d(r * std::cos(a), r * std::sin(a), 0.0);
      } else {
        p = Vec3d(uniform(rng, -he.x(), he.x()), uniform(rng, -he.y(), he.y()), 0.0);
      }
      p.z() = top(p.x());
    } else {
      if (disk) {
        const double a = uniform(rng, -M_PI, M_PI);
        p = Vec3d(o.shape.radius * std::cos(a), o.shape.radius * std::sin(a), 0.0);
      } else {
        // Uniform over the perimeter.
        double u = uniform(rng, 0.0, 2.0 * (he.x() + he.y()));
        if (u < he.x()) p = Vec3d(-he.x() + 2.0 * u, -he.y(), 0.0);
        else if ((u -= he.x()) < he.y()) p = Vec3d(he.x(), -he.y() + 2.0 * u, 0.0);
        else if ((u -= he.y()) < he.x()) p = Vec3d(he.x() - 2.0 * u, he.y(), 0.0);
        else p = Vec3d(-he.x(), he.y() - 2.0 * (u - he.x()), 0.0);
      }
      p.z() = uniform(rng, 0.0, top(p.x()));
    }
    if (sigma > 0.0)
      for (int k = 0; k < 3; ++k) p(k) += sigma * noise(rng);
    pts.push_back(o.pose.apply(p));
  }
  if (occlude) {
    // Camera in front of the table (-y): the half facing away is hidden.
    const Vec3d c = o.pose.translation;
    pts.erase(std::remove_if(pts.begin(), pts.end(), [&](const Vec3d& p) { return p.y() > c.y(); }), pts.end());
  }
  PointCloudd cloud;
  cloud.points.resize(3, static_cast<Eigen::Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) cloud.points.col(static_cast<Eigen::Index>(i)) = pts[i];
  return cloud;
}

// ---------------------------------------------------------------------------

void TraceRecorder::record(const WorldState& s) {
  TraceStep st;
  st.t = t_++;
  for (const auto& a : s.arms) st.grippers[a.id] = {a.gripper, a.closed};
  for (const auto& o : s.objects) st.objects[o.id] = o.pose;
  steps_.push_back(std::move(st));
}

bool test_reachable(const ArmState& arm, const Vec2d& p) { return (p - arm.base).norm() <= arm.reach; }

void exec_move(WorldState& s, const std::string& arm, const Posed& target, TraceRecorder* log) {
  const size_t k = arm_index(s, arm);
  require_reach(s.arms[k], target);
  Posed goal = target;
  // Carried objects travel at carry height.
  if (s.arms[k].held) goal.translation.z() = std::max(goal.translation.z(), s.arms[k].gripper.translation.z());
  move_grippers(s, {{k, goal}}, false, log);
}

void exec_pick(WorldState& s, const std::string& arm, const std::string& object, TraceRecorder* log) {
  const size_t k = arm_index(s, arm);
  ArmState& a = s.arms[k];
  if (a.held) throw SimError("'" + arm + "' already holds '" + *a.held + "'");
  const ObjectState& o = s.object(object);
  if (held_objects(s).count(object)) throw SimError("'" + object + "' is already held");
  if (point_footprint_distance(a.gripper.xy(), o.footprint()) > wc::kGraspThreshold)
    throw SimError("'" + arm + "' is not at a grasp of '" + object + "'");
  a.closed = true;
  a.held = object;
  a.held_offset = compose(a.gripper.inverse(), o.pose);
  if (log) log->record(s);
  vertical(s, k, wc::kCarryHeight, log);
}

void exec_place(WorldState& s, const std::string& arm, const Posed& target, TraceRecorder* log) {
  const size_t k = arm_index(s, arm);
  if (!s.arms[k].held) throw SimError("'" + arm + "' holds nothing to place");
  require_reach(s.arms[k], target);
  const std::string id = *s.arms[k].held;
  const double carry = s.arms[k].gripper.translation.z();
  move_grippers(s, {{k, Posed(Vec3d(target.translation.x(), target.translation.y(), carry), target.rotation)}}, false, log);
  vertical(s, k, target.translation.z() - carry, log);
  ObjectState& o = s.object(id);
  o.pose = o.pose.planarized();
  o.pose.translation.z() = 0.0;
  if (!footprint_contains(s.table.footprint(), o.footprint(), 1e-9)) throw SimError("'" + id + "' would leave the table");
  for (const auto& other : s.objects)
    if (other.id != id && footprint_distance(other.footprint(), o.footprint()) <= sc::kPenetrationTol)
      throw CollisionError("placing '" + id + "' overlaps '" + other.id + "'");
  s.arms[k].closed = false;
  s.arms[k].held.reset();
  if (log) log->record(s);
}

void exec_approach(WorldState& s, const Posed& left, const Posed& right, TraceRecorder* log) {
  if (s.arms.size() != 2) throw SimError("approach needs two arms");
  require_reach(s.arms[0], left);
  require_reach(s.arms[1], right);
  move_grippers(s, {{0, left}, {1, right}}, true, log);
}

void exec_retreat(WorldState& s, TraceRecorder* log) {
  for (auto& a : s.arms) {
    if (!a.held) continue;
    ObjectState& o = s.object(*a.held);
    o.pose = o.pose.planarized();
    o.pose.translation.z() = 0.0;
  }
  for (auto& a : s.arms) {
    a.closed = false;
    a.held.reset();
  }
  if (log) log->record(s);
  std::vector<std::pair<size_t, Posed>> homes;
  for (size_t k = 0; k < s.arms.size(); ++k) homes.emplace_back(k, s.arms[k].home);
  move_grippers(s, homes, false, log);
}

void exec_primitive(WorldState& s, const Primitive& p, TraceRecorder* log) {
  if (p.action == "move") exec_move(s, p.arm, p.target, log);
  else if (p.action == "pick") exec_pick(s, p.arm, p.object, log);
  else if (p.action == "place") exec_place(s, p.arm, p.target, log);
  else if (p.action == "approach") exec_approach(s, p.target, p.target_right, log);
  else if (p.action == "retreat") exec_retreat(s, log);
  else throw SimError("unknown primitive '" + p.action + "'");
}

// ---------------------------------------------------------------------------

Footprint convex_hull(std::vector<Vec2d> pts, double r) {
  std::sort(pts.begin(), pts.end(), [](const Vec2d& p, const Vec2d& q) { return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y()); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return {pts, r};
  // Andrew's monotone chain, CCW.
  std::vector<Vec2d> hull(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return {hull, r};
}

Footprint swept_footprint(const Footprint& a, const Footprint& b) {
  std::vector<Vec2d> pts = a.vertices;
  pts.insert(pts.end(), b.vertices.begin(), b.vertices.end());
  return convex_hull(std::move(pts), std::max(a.radius, b.radius));
}

double min_distance_oracle(const std::vector<std::vector<Footprint>>& bodies, const Footprint& obstacle) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < bodies.size(); ++t) {
    for (const auto& b : bodies[t]) best = std::min(best, footprint_distance(b, obstacle));
    if (t + 1 < bodies.size() && bodies[t].size() == bodies[t + 1].size())
      for (size_t k = 0; k < bodies[t].size(); ++k)
        best = std::min(best, footprint_distance(swept_footprint(bodies[t][k], bodies[t + 1][k]), obstacle));
  }
  return best;
}

std::vector<std::vector<Footprint>> trace_bodies(const DemoTrace& trace, size_t from) {
  std::vector<std::vector<Footprint>> out;
  for (size_t i = from; i < trace.size(); ++i) {
    const TraceStep& st = trace.steps[i];
    std::vector<Footprint> b;
    for (const auto& a : trace.header.arms) b.push_back(Footprint::disk(wc::kGripperRadius).placed(st.grippers.at(a.id).pose));
    for (const auto& o : trace.header.objects) {
      const Posed& p = st.objects.at(o.id);
      if (p.translation.z() > wc::kOnTableTolerance) b.push_back(o.shape.placed(p));
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double planar_distance(const Posed& a, const Posed& b) {
  const Vec2d d = a.xy() - b.xy();
  const double y = 0.1 * wrap_angle(a.yaw() - b.yaw());
  return std::sqrt(d.squaredNorm() + y * y);
}

double raw_distance(const PolicyDemo& d, const Posed& l, const Posed& r) {
  const double a = planar_distance(d.init_l, l), b = planar_distance(d.init_r, r);
  return std::sqrt(a * a + b * b);
}

bool same_poses(const TraceStep& a, const TraceStep& b) {
  for (const auto& [id, g] : a.grippers) {
    const auto& h = b.grippers.at(id).pose;
    if (g.pose.translation != h.translation || g.pose.rotation.coeffs() != h.rotation.coeffs()) return false;
  }
  return true;
}

// One footprint nested in the other.
bool nested(const ObjectState& a, const ObjectState& b) {
  return footprint_contains(a.footprint(), b.footprint(), 1e-6) || footprint_contains(b.footprint(), a.footprint(), 1e-6) ||
         (a.shape.is_disk() && b.shape.is_disk() &&
          (a.pose.xy() - b.pose.xy()).norm() + std::min(a.shape.radius, b.shape.radius) <= std::max(a.shape.radius, b.shape.radius) + 1e-6);
}

std::vector<Posed> replay(const std::vector<Posed>& demo, const Posed& start) {
  std::vector<Posed> out;
  const Posed base = compose(start, demo.front().inverse());
  for (const auto& p : demo) out.push_back(compose(base, p));
  return out;
}

}  // namespace

size_t policy_start_step(const DemoTrace& trace, const EventSequence& seq, const ContactRichSpan& span) {
  const size_t pre = seq.keyframes.at(span.pre).step, mid = seq.keyframes.at(span.mid).step;
  for (size_t i = mid; i-- > pre + 1;)
    if (same_poses(trace.steps[i], trace.steps[i - 1])) return i;
  return pre;
}

double start_distance(const StartCondition& a, const StartCondition& b) {
  const double d[4] = {planar_distance(a.q_l, b.q_l), planar_distance(a.q_r, b.q_r), planar_distance(a.g_l, b.g_l),
                       planar_distance(a.g_r, b.g_r)};
  return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]);
}

PolicyEmulator PolicyEmulator::fit(const std::string& skill, const std::vector<DemoTrace>& traces) {
  if (traces.size() < 2) throw SimError("policy emulator needs at least two demonstrations");
  PolicyEmulator em;
  em.skill = skill;
  for (const auto& tr : traces) {
    const EventSequence seq = segment(tr);
    if (seq.contact_rich.empty()) throw SimError("demonstration has no contact-rich segment");
    const size_t s = policy_start_step(tr, seq, seq.contact_rich.front());
    const WorldState w = tr.state_at(s);
    const ArmState& l = w.arms.at(0);
    const ArmState& r = w.arms.at(1);
    if (!l.held || !r.held) throw SimError("both grippers must hold an object when the coordinated segment starts");
    if (em.left_object.empty()) {
      em.left_object = *l.held;
      em.right_object = *r.held;
    } else if (em.left_object != *l.held || em.right_object != *r.held) {
      throw SimError("demonstrations disagree on the manipulated objects");
    }
    PolicyDemo d;
    d.start = {l.gripper, r.gripper, l.held_offset.inverse(), r.held_offset.inverse()};
    for (size_t i = s; i < tr.size(); ++i) {
      d.left.push_back(tr.steps[i].grippers.at(l.id).pose);
      d.right.push_back(tr.steps[i].grippers.at(r.id).pose);
    }
    const auto& last = tr.steps.back().objects;
    d.final_rel = compose(last.at(em.left_object).inverse(), last.at(em.right_object));
    d.init_l = tr.steps.front().objects.at(em.left_object);
    d.init_r = tr.steps.front().objects.at(em.right_object);
    em.demos.push_back(std::move(d));
  }
  double far = 0.0, far_raw = 0.0;
  for (size_t i = 0; i < em.demos.size(); ++i) {
    double nn = std::numeric_limits<double>::infinity(), nn_raw = nn;
    for (size_t j = 0; j < em.demos.size(); ++j) {
      if (i == j) continue;
      nn = std::min(nn, start_distance(em.demos[i].start, em.demos[j].start));
      nn_raw = std::min(nn_raw, raw_distance(em.demos[j], em.demos[i].init_l, em.demos[i].init_r));
    }
    far = std::max(far, nn);
    far_raw = std::max(far_raw, nn_raw);
  }
  em.radius = 1.5 * far;
  em.raw_radius = 1.5 * far_raw;
  return em;
}

StartCondition PolicyEmulator::start_of(const WorldState& s) const {
  const ArmState& l = s.arms.at(0);
  const ArmState& r = s.arms.at(1);
  return {l.gripper, r.gripper, compose(s.object(left_object).pose.inverse(), l.gripper),
          compose(s.object(right_object).pose.inverse(), r.gripper)};
}

size_t PolicyEmulator::nearest(const StartCondition& c, double* dist) const {
  size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < demos.size(); ++i) {
    const double d = start_distance(c, demos[i].start);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  if (dist) *dist = bd;
  return best;
}

bool PolicyEmulator::in_support(const StartCondition& c) const {
  double d = 0.0;
  nearest(c, &d);
  return d <= radius;
}

std::vector<std::vector<Footprint>> PolicyEmulator::replay_bodies(const WorldState& s) const {
  const PolicyDemo& d = demos.at(nearest(start_of(s)));
  const auto L = replay(d.left, s.arms[0].gripper), R = replay(d.right, s.arms[1].gripper);
  const ObjectState& ol = s.object(left_object);
  const ObjectState& orr = s.object(right_object);
  const Posed off_l = compose(s.arms[0].gripper.inverse(), ol.pose), off_r = compose(s.arms[1].gripper.inverse(), orr.pose);
  std::vector<std::vector<Footprint>> out;
  for (size_t t = 0; t < L.size(); ++t)
    out.push_back({Footprint::disk(wc::kGripperRadius).placed(L[t]), Footprint::disk(wc::kGripperRadius).placed(R[t]),
                   ol.shape.placed(compose(L[t], off_l)), orr.shape.placed(compose(R[t], off_r))});
  return out;
}

PolicyOutcome PolicyEmulator::execute(WorldState& s, TraceRecorder* log) const {
  PolicyOutcome out;
  const ArmState& l = s.arms.at(0);
  const ArmState& r = s.arms.at(1);
  if (!l.held || *l.held != left_object || !r.held || *r.held != right_object) {
    out.reason = "precondition";
    return out;
  }
  const size_t k = nearest(start_of(s), &out.support_distance);
  if (out.support_distance > radius) {
    out.reason = "out-of-support";
    return out;
  }
  const PolicyDemo& d = demos[k];
  const auto L = replay(d.left, l.gripper), R = replay(d.right, r.gripper);
  for (size_t t = 1; t < L.size(); ++t) {
    const WorldState before = s;
    s.arms[0].gripper = L[t];
    s.arms[1].gripper = R[t];
    s.sync_held();
    try {
      check_motion(before, s, false);
    } catch (const CollisionError& e) {
      out.reason = std::string("collision: ") + e.what();
      if (log) log->record(s);
      return out;
    }
    if (log) log->record(s);
  }
  // The policy closes the loop on the final relative placement.
  ObjectState& right_obj = s.object(right_object);
  right_obj.pose = compose(s.object(left_object).pose, d.final_rel);
  s.arms[1].gripper = compose(right_obj.pose, s.arms[1].held_offset.inverse());
  if (log) log->record(s);
  out.success = nested(s.object(left_object), right_obj);
  if (!out.success) out.reason = "goal-not-reached";
  return out;
}

bool PolicyEmulator::raw_in_support(const Posed& l, const Posed& r) const {
  if (demos.empty()) return false;
  const auto inside = [&](const Posed& p, bool left) {
    std::vector<Vec2d> pts;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    const double ref = (left ? demos[0].init_l : demos[0].init_r).yaw();
    for (const auto& d : demos) {
      const Posed& q = left ? d.init_l : d.init_r;
      pts.push_back(q.xy());
      const double dy = wrap_angle(q.yaw() - ref);
      lo = std::min(lo, dy);
      hi = std::max(hi, dy);
    }
    const double y = wrap_angle(p.yaw() - ref);
    return point_footprint_distance(p.xy(), convex_hull(pts)) <= 1e-12 && y >= lo - sc::kStartTolYaw &&
           y <= hi + sc::kStartTolYaw;
  };
  return inside(l, true) && inside(r, false);
}

PolicyOutcome PolicyEmulator::execute_raw(WorldState& s, TraceRecorder* log) const {
  PolicyOutcome out;
  const Posed pl = s.object(left_object).pose, pr = s.object(right_object).pose;
  size_t k = 0;
  out.support_distance = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < demos.size(); ++i) {
    const double d = raw_distance(demos[i], pl, pr);
    if (d < out.support_distance) {
      out.support_distance = d;
      k = i;
    }
  }
  if (!raw_in_support(pl, pr)) {
    out.reason = "out-of-support";
    return out;
  }
  // Interpolating the demonstrations, the policy tracks both objects: it
  // grasps as demonstrated and reaches the demonstrated start configuration.
  const PolicyDemo& d = demos[k];
  try {
    exec_move(s, s.arms[0].id, compose(pl, d.start.g_l), log);
    exec_pick(s, s.arms[0].id, left_object, log);
    exec_move(s, s.arms[1].id, compose(pr, d.start.g_r), log);
    exec_pick(s, s.arms[1].id, right_object, log);
    exec_approach(s, d.start.q_l, d.start.q_r, log);
  } catch (const SimError& e) {
    out.reason = std::string("collision: ") + e.what();
    return out;
  }
  const double raw = out.support_distance;
  out = execute(s, log);
  out.support_distance = raw;
  return out;
}

Json PolicyEmulator::to_json() const {
  const auto poses = [](const std::vector<Posed>& v) {
    Json a = Json::array();
    for (const auto& p : v) a.push_back(pose_to_json(p));
    return a;
  };
  Json ds = Json::array();
  for (const auto& d : demos)
    ds.push_back({{"start", poses({d.start.q_l, d.start.q_r, d.start.g_l, d.start.g_r})},
                  {"left", poses(d.left)},
                  {"right", poses(d.right)},
                  {"final_rel", pose_to_json(d.final_rel)},
                  {"init", poses({d.init_l, d.init_r})}});
  return {{"format", "svip-policy-emulator"}, {"version", 1},          {"skill", skill},
          {"left_object", left_object},       {"right_object", right_object}, {"radius", radius},
          {"raw_radius", raw_radius},         {"demos", ds}};
}

PolicyEmulator PolicyEmulator::from_json(const Json& j) {
  if (j.value("format", "") != "svip-policy-emulator") throw SimError("not an svip-policy-emulator file");
  const auto poses = [](const Json& a) {
    std::vector<Posed> v;
    for (const auto& p : a) v.push_back(pose_from_json(p));
    return v;
  };
  PolicyEmulator em;
  em.skill = j.at("skill").get<std::string>();
  em.left_object = j.at("left_object").get<std::string>();
  em.right_object = j.at("right_object").get<std::string>();
  em.radius = j.at("radius").get<double>();
  em.raw_radius = j.at("raw_radius").get<double>();
  for (const auto& jd : j.at("demos")) {
    PolicyDemo d;
    const auto st = poses(jd.at("start"));
    const auto init = poses(jd.at("init"));
    if (st.size() != 4 || init.size() != 2) throw SimError("malformed emulator demo");
    d.start = {st[0], st[1], st[2], st[3]};
    d.left = poses(jd.at("left"));
    d.right = poses(jd.at("right"));
    d.final_rel = pose_from_json(jd.at("final_rel"));
    d.init_l = init[0];
    d.init_r = init[1];
    em.demos.push_back(std::move(d));
  }
  return em;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& demo_tasks() {
  static const std::vector<std::string> t{"handoff", "insertion", "screwdriver-analogue", "cup-sleeve-analogue"};
  return t;
}

namespace {

void dwell(const WorldState& w, TraceRecorder& rec, int n) {
  for (int i = 0; i < n; ++i) rec.record(w);
}

void attach_clouds(const WorldState& w, TraceRecorder& rec, std::mt19937_64& rng) {
  auto& first = rec.steps().front();
  for (const auto& o : w.objects) first.clouds[o.id] = synth_cloud(w, o.id, rng());
}

Posed jitter(std::mt19937_64& rng, const Posed& p, double xy, double yaw) {
  return compose(p, Posed::planar(uniform(rng, -xy, xy), uniform(rng, -xy, xy), uniform(rng, -yaw, yaw)));
}

// Left holds the receiving object, right brings the inserted one in.
DemoTrace script_insertion(const std::string& task, std::mt19937_64& rng) {
  WorldState w = make_desk();
  const Posed pl = in_square(rng, sc::kSocketCentre, sc::kIdHalf, 0.0), pr = in_square(rng, sc::kPegCentre, sc::kIdHalf, 0.0);
  ObjectState a, b;
  if (task == "insertion") {
    a = make_socket("socket", pl);
    b = make_peg("peg", pr);
  } else if (task == "screwdriver-analogue") {
    a = make_block("case", "case", pl, 0.07, 0.03);
    a.height = 0.04;
    b = make_block("screwdriver", "screwdriver", pr, 0.05, 0.008);
    b.height = 0.02;
  } else {
    a = make_disk_object("cup", "cup", pl, 0.03, 0.06);
    b = make_disk_object("sleeve", "sleeve", pr, 0.038, 0.04);
  }
  w.objects = {a, b};
  const Posed ga = jitter(rng, nominal_grasp(a.kind), 0.005, 0.05);
  const Posed gb = jitter(rng, nominal_grasp(b.kind), 0.003, 0.05);
  const Posed ql = Posed::planar(sc::kMeetLeft.x() + uniform(rng, -0.02, 0.02), sc::kMeetLeft.y() + uniform(rng, -0.02, 0.02),
                                 uniform(rng, -0.05, 0.05), wc::kCarryHeight);
  const Posed qr = Posed::planar(sc::kMeetRight.x() + uniform(rng, -0.02, 0.02), sc::kMeetRight.y() + uniform(rng, -0.02, 0.02),
                                 M_PI + uniform(rng, -0.05, 0.05), wc::kCarryHeight);

  TraceRecorder rec;
  rec.record(w);
  attach_clouds(w, rec, rng);
  exec_move(w, "h_l", compose(a.pose, ga), &rec);
  exec_pick(w, "h_l", a.id, &rec);
  exec_move(w, "h_r", compose(b.pose, gb), &rec);
  exec_pick(w, "h_r", b.id, &rec);
  exec_approach(w, ql, qr, &rec);
  dwell(w, rec, 5);
  const Posed b_final = compose(w.object(a.id).pose, Posed::planar(uniform(rng, -0.005, 0.005), 0.0, 0.0));
  exec_move(w, "h_r", compose(b_final, w.arms[1].held_offset.inverse()), &rec);
  dwell(w, rec, 5);

  DemoTrace tr;
  tr.task = task;
  tr.header = make_desk();
  tr.header.objects = {a, b};
  tr.steps = std::move(rec.steps());
  return tr;
}

DemoTrace script_handoff(std::mt19937_64& rng) {
  WorldState w = make_desk();
  ObjectState o = make_block("o1", "bar", in_square(rng, Vec2d(0.2, 0.0), 0.05, uniform(rng, -0.2, 0.2)), 0.04, 0.015);
  w.objects = {o};
  const Posed gr = jitter(rng, nominal_grasp("bar"), 0.003, 0.05);
  const Posed gl = jitter(rng, Posed::planar(-0.03, 0.0, 0.0), 0.003, 0.05);
  const Posed mid = Posed::planar(uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02), uniform(rng, -0.1, 0.1), wc::kCarryHeight);

  TraceRecorder rec;
  rec.record(w);
  attach_clouds(w, rec, rng);
  exec_move(w, "h_r", compose(o.pose, gr), &rec);
  exec_pick(w, "h_r", o.id, &rec);
  exec_move(w, "h_r", compose(mid, w.arms[1].held_offset.inverse()), &rec);
  dwell(w, rec, 3);
  exec_move(w, "h_l", compose(w.object(o.id).pose, gl), &rec);
  w.arms[0].closed = true;  // second grasp: the bar is held by both
  w.arms[0].held = o.id;
  w.arms[0].held_offset = compose(w.arms[0].gripper.inverse(), w.object(o.id).pose);
  rec.record(w);
  dwell(w, rec, 3);
  w.arms[1].closed = false;
  w.arms[1].held.reset();
  rec.record(w);
  exec_move(w, "h_r", w.arms[1].home, &rec);
  dwell(w, rec, 3);

  DemoTrace tr;
  tr.task = "handoff";
  tr.header = make_desk();
  tr.header.objects = {o};
  tr.steps = std::move(rec.steps());
  return tr;
}

}  // namespace

std::vector<DemoTrace> scripted_demos(const std::string& task, int n, uint64_t seed) {
  const auto& tasks = demo_tasks();
  if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) throw std::invalid_argument("unknown demo task '" + task + "'");
  std::vector<DemoTrace> out;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed(seed, task + "/" + std::to_string(i)));
    for (int attempt = 0;; ++attempt) {
      try {
        DemoTrace tr = task == "handoff" ? script_handoff(rng) : script_insertion(task, rng);
        const EventSequence seq = segment(tr);
        if (seq.contact_rich.size() != 1) throw SimError("demo did not segment into one contact-rich span");
        out.push_back(std::move(tr));
        break;
      } catch (const SimError&) {
        if (attempt >= 20) throw;
      }
    }
  }
  return out;
}

}  // namespace svip
