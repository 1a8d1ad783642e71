#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "svip/geometry.hpp"
#include "svip/world.hpp"

namespace svip {

enum class EntityKind { Gripper, Region, Object };

struct Entity {
  std::string id;
  EntityKind kind;
  bool operator==(const Entity&) const = default;
};

/// Edge labels. Contact joins two objects and only appears in contact-rich
/// segments; the other four follow the gripper/region/object rules.
namespace labels {
inline const std::string AtGrasp = "AtGrasp";
inline const std::string AtConf = "AtConf";
inline const std::string AtPose = "AtPose";
inline const std::string AtRelativePose = "AtRelativePose";
inline const std::string Contact = "Contact";
}  // namespace labels

inline const std::string kTableId = "table";

struct Edge {
  std::string src;
  std::string dst;
  std::string label;
  Posed payload;  // g (gripper in object frame), q (gripper pose) or p

  /// Ordering and equality ignore the payload.
  auto key() const { return std::tie(src, dst, label); }
};

class SceneGraph {
 public:
  std::vector<Entity> entities;
  std::vector<Edge> edges;  // sorted by key

  void add_edge(Edge e);
  void sort_edges();

  /// Same contact mode: equal (src, dst, label) sets.
  bool same_mode(const SceneGraph& other) const;

  std::vector<const Edge*> edges_with(const std::string& label) const;
  int grasp_count(const std::string& object) const;

  /// A contact-rich graph has an object held by two grippers or two
  /// objects in contact.
  bool contact_rich() const;

  std::string to_string() const;
};

class SceneGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gr(s): map a world state to its scene graph.
SceneGraph graph_of_state(const WorldState& s);

// ---------------------------------------------------------------------------

struct GripperSample {
  Posed pose;
  bool closed = false;
};

struct TraceStep {
  int t = 0;
  std::map<std::string, GripperSample> grippers;
  std::map<std::string, Posed> objects;
  std::map<std::string, PointCloudd> clouds;
};

/// A recorded demonstration: a header world (shapes, arms, regions) plus
/// time-indexed gripper and object poses.
struct DemoTrace {
  std::string task;
  WorldState header;
  std::vector<TraceStep> steps;

  size_t size() const { return steps.size(); }

  /// Reconstruct the world at step i; carried objects are inferred from
  /// closed grippers within the grasp threshold.
  WorldState state_at(size_t i) const;

  void validate() const;
};

struct ContactRichSpan {
  size_t pre;                 // keyframe index of G_pre
  size_t mid;                 // keyframe index of G_mid
  std::optional<size_t> eff;  // keyframe index of G_eff; absent if the trace ends contact-rich
};

struct Keyframe {
  int t;
  size_t step;  // index into the trace
  SceneGraph graph;
};

struct EventSequence {
  std::vector<Keyframe> keyframes;
  std::vector<ContactRichSpan> contact_rich;

  std::vector<int> times() const;
  /// Step indices [begin, end) covered by keyframe k.
  std::pair<size_t, size_t> step_range(size_t k, size_t trace_length) const;
};

/// Event-driven scene graph sequence G(D).
EventSequence segment(const DemoTrace& trace);

struct ObjectCentricTrajectory {
  std::string object;
  std::string gripper;
  std::vector<int> times;
  std::vector<Posed> poses;  // gripper poses in the object frame
  Posed grasp;               // pose at minimum gripper-object distance
};

/// Object-centric gripper trajectory around keyframe `event` for object `o`.
ObjectCentricTrajectory extract_grasp(const DemoTrace& trace, const std::string& o, size_t event,
                                      const EventSequence& seq, int half_window = 25);

/// Resample an object-centric trajectory to a fixed number of waypoints.
std::vector<Posed> resample_trajectory(const std::vector<Posed>& poses, size_t waypoints);

// JSON Lines IO: a header line then one line per timestep.
void write_trace(std::ostream& os, const DemoTrace& trace);
DemoTrace read_trace(std::istream& is);
void save_trace(const std::string& path, const DemoTrace& trace);
DemoTrace load_trace(const std::string& path);

}  // namespace svip
