#include "svip/world.hpp"

#include <stdexcept>

namespace svip {

Eigen::Vector3d ObjectState::feature() const {
  const Vec2d he = shape.half_extents();
  const double aspect = std::max(he.x(), he.y()) / std::max(1e-9, std::min(he.x(), he.y()));
  return {shape.bounding_radius(), aspect, graspable ? 1.0 : 0.0};
}

ObjectState& WorldState::object(const std::string& id) {
  for (auto& o : objects)
    if (o.id == id) return o;
  throw std::out_of_range("unknown object '" + id + "'");
}

const ObjectState& WorldState::object(const std::string& id) const {
  return const_cast<WorldState*>(this)->object(id);
}

const ObjectState* WorldState::find_object(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

ArmState& WorldState::arm(const std::string& id) {
  for (auto& a : arms)
    if (a.id == id) return a;
  throw std::out_of_range("unknown arm '" + id + "'");
}

const ArmState& WorldState::arm(const std::string& id) const { return const_cast<WorldState*>(this)->arm(id); }

const Region* WorldState::find_region(const std::string& id) const {
  for (const auto& r : regions)
    if (r.id == id) return &r;
  return nullptr;
}

void WorldState::sync_held() {
  for (const auto& a : arms)
    if (a.held) object(*a.held).pose = compose(a.gripper, a.held_offset);
}

std::vector<Footprint> robot_footprints(const WorldState& s) {
  std::vector<Footprint> out;
  for (const auto& a : s.arms) {
    out.push_back(Footprint::disk(world_constants::kGripperRadius).placed(a.gripper));
    if (a.held) out.push_back(s.object(*a.held).footprint());
  }
  return out;
}

WorldState make_desk() {
  WorldState w;
  w.table = Rect{Vec2d(0.0, 0.0), Vec2d(0.6, 0.4)};
  ArmState left;
  left.id = "h_l";
  left.base = Vec2d(-0.55, 0.0);
  left.home = Posed::planar(-0.45, 0.28, 0.0);
  left.gripper = left.home;
  ArmState right;
  right.id = "h_r";
  right.base = Vec2d(0.55, 0.0);
  right.home = Posed::planar(0.45, 0.28, M_PI);
  right.gripper = right.home;
  w.arms = {left, right};
  return w;
}

}  // namespace svip
