#pragma once

#include <vector>

#include "svip/geometry.hpp"

namespace svip {

/// Planar convex footprint: a convex polygon (1, 2 or >= 3 vertices, CCW)
/// inflated by a radius. A disk is one vertex plus radius, a capsule two.
struct Footprint {
  std::vector<Vec2d> vertices;
  double radius = 0.0;

  static Footprint disk(double r) { return {{Vec2d::Zero()}, r}; }
  static Footprint rectangle(double half_x, double half_y) {
    return {{{-half_x, -half_y}, {half_x, -half_y}, {half_x, half_y}, {-half_x, half_y}}, 0.0};
  }
  static Footprint capsule(const Vec2d& a, const Vec2d& b, double r) { return {{a, b}, r}; }

  bool is_disk() const { return vertices.size() == 1; }
  bool is_rectangle() const { return vertices.size() == 4 && radius == 0.0; }

  /// Half extents of the polygon's bounding box (local frame) inflated by radius.
  Vec2d half_extents() const;

  /// Radius of the smallest origin-centred disk containing the footprint.
  double bounding_radius() const;

  /// Footprint placed in the world by a planar pose.
  Footprint placed(const Posed& pose) const;
};

double point_segment_distance(const Vec2d& p, const Vec2d& a, const Vec2d& b);
double segment_segment_distance(const Vec2d& a0, const Vec2d& a1, const Vec2d& b0, const Vec2d& b1);

/// Distance between two world-placed footprints; 0 when they overlap.
double footprint_distance(const Footprint& a, const Footprint& b);

/// Distance from a point to a world-placed footprint; 0 inside.
double point_footprint_distance(const Vec2d& p, const Footprint& f);

/// True if every point of `inner` lies within `outer` (both world-placed,
/// `outer` must be a plain polygon) up to `tol`.
bool footprint_contains(const Footprint& outer, const Footprint& inner, double tol = 1e-9);

/// Axis-aligned rectangle, used for the table and named regions.
struct Rect {
  Vec2d center = Vec2d::Zero();
  Vec2d half = Vec2d::Zero();

  bool contains(const Vec2d& p, double margin = 0.0) const {
    return std::abs(p.x() - center.x()) <= half.x() - margin && std::abs(p.y() - center.y()) <= half.y() - margin;
  }
  Footprint footprint() const { return Footprint::rectangle(half.x(), half.y()).placed(Posed::planar(center.x(), center.y(), 0.0)); }
};

}  // namespace svip
