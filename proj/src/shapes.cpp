#include "svip/shapes.hpp"

#include <algorithm>
#include <limits>

namespace svip {

namespace {

double cross2(const Vec2d& a, const Vec2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Strictly-or-on-boundary inside test for a convex CCW polygon.
bool inside_convex(const std::vector<Vec2d>& poly, const Vec2d& p) {
  if (poly.size() < 3) return false;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2d& a = poly[i];
    const Vec2d& b = poly[(i + 1) % poly.size()];
    if (cross2(b - a, p - a) < -1e-15) return false;
  }
  return true;
}

// Distance between the polygonal cores (no inflation).
double core_distance(const std::vector<Vec2d>& a, const std::vector<Vec2d>& b) {
  if (inside_convex(a, b.front()) || inside_convex(b, a.front())) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  auto edges = [](const std::vector<Vec2d>& poly, size_t i) {
    const size_t n = poly.size();
    return std::pair<Vec2d, Vec2d>(poly[i], poly[n == 1 ? i : (i + 1) % n]);
  };
  const size_t na = a.size() >= 3 ? a.size() : std::max<size_t>(1, a.size() - 1);
  const size_t nb = b.size() >= 3 ? b.size() : std::max<size_t>(1, b.size() - 1);
  for (size_t i = 0; i < na; ++i) {
    const auto [a0, a1] = edges(a, i);
    for (size_t j = 0; j < nb; ++j) {
      const auto [b0, b1] = edges(b, j);
      best = std::min(best, segment_segment_distance(a0, a1, b0, b1));
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

}  // namespace

Vec2d Footprint::half_extents() const {
  Vec2d hi = Vec2d::Zero();
  for (const auto& v : vertices) hi = hi.cwiseMax(v.cwiseAbs());
  return hi + Vec2d::Constant(radius);
}

double Footprint::bounding_radius() const {
  double r = 0.0;
  for (const auto& v : vertices) r = std::max(r, v.norm());
  return r + radius;
}

Footprint Footprint::placed(const Posed& pose) const {
  const double c = std::cos(pose.yaw()), s = std::sin(pose.yaw());
  Footprint out{{}, radius};
  out.vertices.reserve(vertices.size());
  for (const auto& v : vertices)
    out.vertices.emplace_back(pose.translation.x() + c * v.x() - s * v.y(), pose.translation.y() + s * v.x() + c * v.y());
  return out;
}

double point_segment_distance(const Vec2d& p, const Vec2d& a, const Vec2d& b) {
  const Vec2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double segment_segment_distance(const Vec2d& a0, const Vec2d& a1, const Vec2d& b0, const Vec2d& b1) {
  const Vec2d da = a1 - a0, db = b1 - b0;
  const double denom = cross2(da, db);
  if (denom != 0.0) {
    const double t = cross2(b0 - a0, db) / denom;
    const double u = cross2(b0 - a0, da) / denom;
    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) return 0.0;
  }
  return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                   point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

double footprint_distance(const Footprint& a, const Footprint& b) {
  return std::max(0.0, core_distance(a.vertices, b.vertices) - a.radius - b.radius);
}

double point_footprint_distance(const Vec2d& p, const Footprint& f) {
  return footprint_distance(Footprint{{p}, 0.0}, f);
}

bool footprint_contains(const Footprint& outer, const Footprint& inner, double tol) {
  if (outer.vertices.size() < 3) return false;
  // Inflated inner is contained iff every core vertex is at least radius deep.
  for (const auto& v : inner.vertices) {
    if (!inside_convex(outer.vertices, v)) {
      // Allow tolerance outside the boundary.
      double d = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < outer.vertices.size(); ++i)
        d = std::min(d, point_segment_distance(v, outer.vertices[i], outer.vertices[(i + 1) % outer.vertices.size()]));
      if (d > tol) return false;
      if (inner.radius > tol) return false;
      continue;
    }
    double depth = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < outer.vertices.size(); ++i)
      depth = std::min(depth, point_segment_distance(v, outer.vertices[i], outer.vertices[(i + 1) % outer.vertices.size()]));
    if (depth + tol < inner.radius) return false;
  }
  return true;
}

}  // namespace svip
