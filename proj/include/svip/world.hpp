#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svip/geometry.hpp"
#include "svip/shapes.hpp"

namespace svip {

/// Rigid object resting on or carried above the table.
struct ObjectState {
  std::string id;
  std::string kind;  // object class, e.g. "peg", "socket", "pole"
  Footprint shape;
  Posed pose;
  double height = 0.03;
  double taper = 0.0;  // relative top-surface slope along local +x
  bool graspable = true;

  Footprint footprint() const { return shape.placed(pose); }

  /// Geometric feature [footprint radius, aspect ratio, graspable flag].
  Eigen::Vector3d feature() const;
};

/// Abstract planar arm: a base point, a reach radius and a gripper pose.
struct ArmState {
  std::string id;  // "h_l" / "h_r"
  Vec2d base = Vec2d::Zero();
  double reach = 0.7;
  Posed gripper;
  Posed home;
  bool closed = false;
  std::optional<std::string> held;
  Posed held_offset;  // object pose expressed in the gripper frame
};

struct Region {
  std::string id;
  Rect rect;
};

struct WorldState {
  Rect table;
  std::vector<ObjectState> objects;
  std::vector<ArmState> arms;  // [left, right]
  std::vector<Region> regions;

  ObjectState& object(const std::string& id);
  const ObjectState& object(const std::string& id) const;
  const ObjectState* find_object(const std::string& id) const;
  ArmState& arm(const std::string& id);
  const ArmState& arm(const std::string& id) const;
  const Region* find_region(const std::string& id) const;

  /// Carried objects follow their gripper: pose = gripper * held_offset.
  void sync_held();
};

// Geometry shared by every module. Units are meters and radians.
namespace world_constants {
inline constexpr double kGraspThreshold = 0.02;     // closed gripper to footprint
inline constexpr double kContactClearance = 0.005;  // object-object contact
inline constexpr double kGripperRadius = 0.03;
inline constexpr double kCarryHeight = 0.05;
inline constexpr double kOnTableTolerance = 0.01;
}  // namespace world_constants

/// Robot footprints (gripper disks and carried objects) at one instant.
std::vector<Footprint> robot_footprints(const WorldState& s);

/// The default desk: 1.2 m x 0.8 m table, arms facing each other along x.
WorldState make_desk();

}  // namespace svip
