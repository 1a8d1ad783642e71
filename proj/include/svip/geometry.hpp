#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace svip {

template <class S>
using Vec2 = Eigen::Matrix<S, 2, 1>;
template <class S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using Mat3 = Eigen::Matrix<S, 3, 3>;
template <class S>
using Rot6 = Eigen::Matrix<S, 6, 1>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wrap an angle to (-pi, pi].
template <class S>
S wrap_angle(S a) {
  const S two_pi = S(2) * S(M_PI);
  a = std::fmod(a + S(M_PI), two_pi);
  if (a <= S(0)) a += two_pi;
  return a - S(M_PI);
}

/// Rigid transform with (w,x,y,z) Hamilton quaternion rotation.
template <class S>
struct Pose {
  Vec3<S> translation = Vec3<S>::Zero();
  Eigen::Quaternion<S> rotation = Eigen::Quaternion<S>::Identity();

  Pose() = default;
  Pose(const Vec3<S>& t, const Eigen::Quaternion<S>& q) : translation(t), rotation(q.normalized()) {}

  static Pose identity() { return Pose(); }

  static Pose planar(S x, S y, S yaw, S z = S(0)) {
    return Pose(Vec3<S>(x, y, z), Eigen::Quaternion<S>(Eigen::AngleAxis<S>(yaw, Vec3<S>::UnitZ())));
  }

  static Pose translate(S x, S y, S z = S(0)) { return Pose(Vec3<S>(x, y, z), Eigen::Quaternion<S>::Identity()); }

  Mat3<S> matrix() const { return rotation.toRotationMatrix(); }

  /// Heading about +z; exact for yaw-only rotations.
  S yaw() const {
    const Mat3<S> r = matrix();
    return std::atan2(r(1, 0), r(0, 0));
  }

  Vec2<S> xy() const { return translation.template head<2>(); }

  Vec3<S> apply(const Vec3<S>& p) const { return rotation * p + translation; }

  Pose inverse() const {
    const Eigen::Quaternion<S> qi = rotation.conjugate();
    return Pose(-(qi * translation), qi);
  }

  /// Project onto the planar subgroup (x, y, z, yaw).
  Pose planarized() const { return planar(translation.x(), translation.y(), yaw(), translation.z()); }

  bool is_valid(S tol = S(1e-9)) const {
    return translation.allFinite() && std::abs(rotation.coeffs().norm() - S(1)) <= tol;
  }

  /// [tx, ty, tz, qw, qx, qy, qz]
  std::array<S, 7> to_array() const {
    return {translation.x(), translation.y(), translation.z(), rotation.w(), rotation.x(), rotation.y(), rotation.z()};
  }

  static Pose from_array(const std::array<S, 7>& a) {
    const Eigen::Quaternion<S> q(a[3], a[4], a[5], a[6]);
    if (!(q.norm() > S(0))) throw GeometryError("pose quaternion has zero norm");
    return Pose(Vec3<S>(a[0], a[1], a[2]), q);
  }
};

using Posed = Pose<double>;

template <class S>
Pose<S> compose(const Pose<S>& a, const Pose<S>& b) {
  return Pose<S>(a.translation + a.rotation * b.translation, a.rotation * b.rotation);
}

template <class S>
Pose<S> operator*(const Pose<S>& a, const Pose<S>& b) {
  return compose(a, b);
}

template <class S>
S translation_distance(const Pose<S>& a, const Pose<S>& b) {
  return (a.translation - b.translation).norm();
}

/// Geodesic rotation angle between two poses.
template <class S>
S rotation_distance(const Pose<S>& a, const Pose<S>& b) {
  return a.rotation.angularDistance(b.rotation);
}

template <class S>
bool approx_equal(const Pose<S>& a, const Pose<S>& b, S tol) {
  return translation_distance(a, b) <= tol && (a.matrix() - b.matrix()).norm() <= tol;
}

// ---------------------------------------------------------------------------
// 6D rotation encoding: the first two columns of the rotation matrix.

template <class S>
Rot6<S> rot6d_encode(const Mat3<S>& r) {
  Rot6<S> v;
  v << r.col(0), r.col(1);
  return v;
}

template <class S>
Rot6<S> rot6d_encode(const Eigen::Quaternion<S>& q) {
  return rot6d_encode<S>(q.toRotationMatrix());
}

/// Gram-Schmidt decode; throws on near-parallel or vanishing columns.
template <class S>
Mat3<S> rot6d_decode(const Rot6<S>& v, S eps = S(1e-9)) {
  if (!v.allFinite()) throw GeometryError("rot6d: non-finite encoding");
  const Vec3<S> a = v.template head<3>();
  const Vec3<S> b = v.template tail<3>();
  const S na = a.norm();
  if (na < eps) throw GeometryError("rot6d: degenerate first column");
  const Vec3<S> e1 = a / na;
  const Vec3<S> b_perp = b - e1.dot(b) * e1;
  const S nb = b_perp.norm();
  if (nb < eps * std::max(S(1), b.norm())) throw GeometryError("rot6d: near-parallel columns");
  const Vec3<S> e2 = b_perp / nb;
  Mat3<S> r;
  r << e1, e2, e1.cross(e2);
  return r;
}

// ---------------------------------------------------------------------------

/// Points stored column-wise (3 x N), meters.
template <class S>
struct PointCloud {
  Eigen::Matrix<S, 3, Eigen::Dynamic> points;
  std::string frame = "world";

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  Vec3<S> centroid() const { return points.rowwise().mean(); }

  /// Row-major flat array [x0, y0, z0, x1, ...].
  std::vector<S> flatten() const {
    std::vector<S> out(static_cast<size_t>(points.size()));
    for (Eigen::Index i = 0; i < points.cols(); ++i)
      for (int k = 0; k < 3; ++k) out[static_cast<size_t>(3 * i + k)] = points(k, i);
    return out;
  }

  static PointCloud from_flat(const std::vector<S>& flat, std::string frame = "world") {
    if (flat.size() % 3 != 0) throw GeometryError("point cloud: flat array length not divisible by 3");
    PointCloud c;
    c.frame = std::move(frame);
    c.points.resize(3, static_cast<Eigen::Index>(flat.size() / 3));
    for (size_t i = 0; i < flat.size(); ++i) c.points(static_cast<Eigen::Index>(i % 3), static_cast<Eigen::Index>(i / 3)) = flat[i];
    return c;
  }
};

using PointCloudd = PointCloud<double>;

template <class S>
PointCloud<S> transform_cloud(const Pose<S>& t, const PointCloud<S>& c) {
  if (c.empty()) throw GeometryError("transform_cloud: empty cloud");
  PointCloud<S> out;
  out.frame = c.frame;
  out.points = (t.matrix() * c.points).colwise() + t.translation;
  return out;
}

}  // namespace svip
