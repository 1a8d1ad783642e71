#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "svip/json_io.hpp"
#include "svip/scenegraph.hpp"
#include "svip/world.hpp"

namespace svip {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ReachError : public SimError {
 public:
  using SimError::SimError;
};
class CollisionError : public SimError {
 public:
  using SimError::SimError;
};

namespace sim_constants {
inline const Vec2d kSocketCentre(-0.2, 0.0);
inline const Vec2d kPegCentre(0.2, 0.0);
inline constexpr double kIdHalf = 0.1;      // 0.2 m square
inline constexpr double kXyOodHalf = 0.125;  // 0.25 m square
inline const Vec2d kMeetLeft(-0.12, 0.0);
inline const Vec2d kMeetRight(0.12, 0.0);
inline constexpr double kStepLength = 0.01;  // interpolation resolution
inline constexpr double kStepAngle = 0.05;
inline constexpr double kPenetrationTol = 1e-6;
inline constexpr double kStartTolXY = 0.01;
inline constexpr double kStartTolYaw = 0.05;
}  // namespace sim_constants

ObjectState make_socket(const std::string& id, const Posed& pose);
ObjectState make_peg(const std::string& id, const Posed& pose);
ObjectState make_pole(const std::string& id, const Posed& pose);
ObjectState make_block(const std::string& id, const std::string& kind, const Posed& pose, double hx, double hy);

/// Demonstrated grasp (gripper in object frame) for an object class.
Posed nominal_grasp(const std::string& kind);

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
  std::string name;
  uint64_t seed = 0;
  WorldState world;
};

const std::vector<std::string>& scenario_names();

/// Throws std::invalid_argument for unknown names.
Scenario sample_scenario(const std::string& name, uint64_t seed);

// ---------------------------------------------------------------------------
// Perception

/// 256 points on the top surface and side walls of `o` (fewer when the
/// half-plane occlusion drops the far side).
PointCloudd synth_cloud(const WorldState& s, const std::string& o, uint64_t seed, double sigma = 0.002,
                        bool occlude = false);

// ---------------------------------------------------------------------------
// Scripted primitives. Each appends dense steps to `log` when given.

struct Primitive {
  std::string action;  // pick | place | move | approach | retreat
  std::string arm;
  std::string object;
  Posed target;        // gripper target (left target for approach)
  Posed target_right;  // right gripper target for approach
};

class TraceRecorder {
 public:
  explicit TraceRecorder(int t0 = 0) : t_(t0) {}
  void record(const WorldState& s);
  std::vector<TraceStep>& steps() { return steps_; }
  const std::vector<TraceStep>& steps() const { return steps_; }
  int next_t() const { return t_; }

 private:
  int t_;
  std::vector<TraceStep> steps_;
};

void exec_primitive(WorldState& s, const Primitive& p, TraceRecorder* log = nullptr);

/// Move one gripper along a straight line. Empty-handed transit is lifted
/// and collision-free; a carried object is checked against the others.
void exec_move(WorldState& s, const std::string& arm, const Posed& target, TraceRecorder* log = nullptr);
void exec_pick(WorldState& s, const std::string& arm, const std::string& object, TraceRecorder* log = nullptr);
/// Carry to `target` and set the held object down.
void exec_place(WorldState& s, const std::string& arm, const Posed& target, TraceRecorder* log = nullptr);
void exec_approach(WorldState& s, const Posed& left, const Posed& right, TraceRecorder* log = nullptr);
/// Set held objects down, open and return both grippers home.
void exec_retreat(WorldState& s, TraceRecorder* log = nullptr);

bool test_reachable(const ArmState& arm, const Vec2d& p);

// ---------------------------------------------------------------------------
// Distance oracle

/// Convex hull (CCW) of a point set, inflated by `radius`.
Footprint convex_hull(std::vector<Vec2d> pts, double radius = 0.0);

/// Swept footprint between two placements of one body: the convex hull of
/// both placements (exact for translation).
Footprint swept_footprint(const Footprint& a, const Footprint& b);

/// bodies[t][k]: world footprint of robot body k at waypoint t. Returns the
/// minimum distance of any swept body to the obstacle.
double min_distance_oracle(const std::vector<std::vector<Footprint>>& bodies, const Footprint& obstacle);

/// Robot bodies (gripper disks and carried objects) at trace steps [from, end).
std::vector<std::vector<Footprint>> trace_bodies(const DemoTrace& trace, size_t from);

// ---------------------------------------------------------------------------
// Policy emulator

/// Where the coordinated segment takes over: both gripper poses and both
/// grasps expressed in their object frames.
struct StartCondition {
  Posed q_l, q_r, g_l, g_r;
};

/// Planar distance over the four poses; yaw differences weigh 0.1 m/rad.
double start_distance(const StartCondition& a, const StartCondition& b);

struct PolicyDemo {
  StartCondition start;
  std::vector<Posed> left, right;  // gripper poses from the start step on
  Posed final_rel;                 // right object in the left object's frame at the end
  Posed init_l, init_r;            // initial object poses (raw start)
};

struct PolicyOutcome {
  bool success = false;
  std::string reason;  // empty on success
  double support_distance = 0.0;
};

class PolicyEmulator {
 public:
  std::string skill;
  std::string left_object, right_object;
  std::vector<PolicyDemo> demos;
  double radius = 0.0;      // support radius over start conditions
  double raw_radius = 0.0;  // nearest-neighbour radius over initial object poses (reported only)

  /// Fit from segmented demos. The start step is the last step of the
  /// approach where both grippers rest.
  static PolicyEmulator fit(const std::string& skill, const std::vector<DemoTrace>& demos);

  StartCondition start_of(const WorldState& s) const;
  size_t nearest(const StartCondition& c, double* dist = nullptr) const;
  bool in_support(const StartCondition& c) const;

  /// Robot bodies along the replayed coordinated motion from state `s`.
  std::vector<std::vector<Footprint>> replay_bodies(const WorldState& s) const;

  /// Execute the coordinated segment from the current (pre-grasped) state.
  PolicyOutcome execute(WorldState& s, TraceRecorder* log = nullptr) const;

  /// Interpolation gate for the raw start: each object's position lies in
  /// the convex hull of its demonstrated initial positions and its heading
  /// within the demonstrated range (+- kStartTolYaw).
  bool raw_in_support(const Posed& left, const Posed& right) const;

  /// Run the whole task from the raw initial state. Inside the raw support
  /// the policy grasps as demonstrated and runs the coordinated segment;
  /// support_distance reports the nearest demo in initial object poses.
  PolicyOutcome execute_raw(WorldState& s, TraceRecorder* log = nullptr) const;

  Json to_json() const;
  static PolicyEmulator from_json(const Json& j);
};

/// Index of the step where the coordinated segment starts in a segmented demo.
size_t policy_start_step(const DemoTrace& trace, const EventSequence& seq, const ContactRichSpan& span);

// ---------------------------------------------------------------------------
// Demonstrations

const std::vector<std::string>& demo_tasks();

/// n scripted traces with ID-range initial states; each has exactly one
/// contact-rich triple. Throws std::invalid_argument for unknown tasks.
std::vector<DemoTrace> scripted_demos(const std::string& task, int n, uint64_t seed);

}  // namespace svip
