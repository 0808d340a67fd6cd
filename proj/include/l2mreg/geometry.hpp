#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>

namespace l2mreg {

/// Meters, Z axis vertical-up.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;

/// Plane normal·x + offset = 0 with a unit normal.
struct PlaneParams {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
  PlaneParams flipped() const { return {-normal, -offset}; }
};

/// Scalar-first quaternion (q0 is the real part).
struct Quaternion {
  double q0 = 1.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;

  static Quaternion identity() { return {}; }
  static Quaternion from_axis_angle(const Vec3& axis, double angle_rad);
  static Quaternion from_matrix(const Mat3& r);

  double norm() const;
  Quaternion normalized() const;
  Quaternion conjugate() const { return {q0, -q1, -q2, -q3}; }
  /// Sign-canonical form with q0 >= 0 (q and -q encode the same rotation).
  Quaternion canonical() const;

  /// Homogeneous quadratic form of the rotation matrix. Equals the proper
  /// rotation only for unit quaternions; the unnormalized form is what the
  /// adjustment differentiates.
  Mat3 matrix() const;

  Eigen::Vector4d as_vector() const { return {q0, q1, q2, q3}; }
};

Quaternion operator*(const Quaternion& a, const Quaternion& b);

struct RigidTransform {
  Quaternion rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const;
  RigidTransform inverse() const;
  Mat4 matrix() const;
};

/// (a * b).apply(p) == a.apply(b.apply(p)).
RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

/// Incremental first/second moments of a point set, used for plane fits
/// that grow one point at a time. Moments are taken about `shift` so large
/// coordinates keep their precision.
class PlaneMoments {
 public:
  PlaneMoments() = default;
  explicit PlaneMoments(const Vec3& shift) : shift_(shift) {}

  void add(const Vec3& p);
  std::size_t count() const { return count_; }
  Vec3 centroid() const;
  Mat3 scatter() const;

  /// Total-least-squares plane. Throws DegenerateInput when fewer than
  /// three points or the points are collinear.
  PlaneParams fit() const;

 private:
  Vec3 shift_ = Vec3::Zero();
  std::size_t count_ = 0;
  Vec3 sum_ = Vec3::Zero();
  Mat3 outer_ = Mat3::Zero();
};

/// Total-least-squares plane through the points. Orientation is fixed so
/// that offset < 0 when the plane misses the origin; for planes through the
/// origin the first nonzero of (n_z, n_y, n_x) is made positive.
PlaneParams fit_plane(std::span<const Vec3> points);
PlaneParams fit_plane(std::span<const Vec3> points,
                      std::span<const std::size_t> indices);

/// Applies the deterministic orientation rule of fit_plane.
PlaneParams orient_plane(PlaneParams plane);

double point_plane_distance(const Vec3& p, const PlaneParams& plane);

/// Folded angle between two unit normals, degrees in [0, 90].
double rotation_angle_between_normals(const Vec3& a, const Vec3& b);

/// Dihedral angle between the plane and the horizontal, degrees in [0, 90].
/// Vertical walls give 90, horizontal surfaces 0.
double verticality_angle(const PlaneParams& plane);
double verticality_angle(const Vec3& normal);

Vec3 apply_transform(const RigidTransform& t, const Vec3& p);

/// Plane whose points are the images under `t` of the input plane's points.
PlaneParams transform_plane(const RigidTransform& t, const PlaneParams& plane);

/// Rotation angle of the relative rotation between two quaternions, degrees.
double rotation_angle_between(const Quaternion& a, const Quaternion& b);

}  // namespace l2mreg
