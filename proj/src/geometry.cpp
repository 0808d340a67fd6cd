#include "l2mreg/geometry.hpp"

#include "l2mreg/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace l2mreg {

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
  const Vec3 u = axis.normalized();
  const double s = std::sin(0.5 * angle_rad);
  return {std::cos(0.5 * angle_rad), s * u.x(), s * u.y(), s * u.z()};
}

Quaternion Quaternion::from_matrix(const Mat3& r) {
  // Shepperd: branch on the largest of the four squared components.
  const double trace = r.trace();
  Quaternion q;
  if (trace >= r(0, 0) && trace >= r(1, 1) && trace >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
         (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
         (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
         (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
         (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  return q.normalized().canonical();
}

double Quaternion::norm() const {
  return std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {q0 / n, q1 / n, q2 / n, q3 / n};
}

Quaternion Quaternion::canonical() const {
  if (q0 < 0.0) return {-q0, -q1, -q2, -q3};
  return *this;
}

Mat3 Quaternion::matrix() const {
  Mat3 r;
  r << q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3, 2.0 * (q1 * q2 - q0 * q3),
      2.0 * (q1 * q3 + q0 * q2),
      2.0 * (q1 * q2 + q0 * q3), q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
      2.0 * (q2 * q3 - q0 * q1),
      2.0 * (q1 * q3 - q0 * q2), 2.0 * (q2 * q3 + q0 * q1),
      q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3;
  return r;
}

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.q0 * b.q0 - a.q1 * b.q1 - a.q2 * b.q2 - a.q3 * b.q3,
          a.q0 * b.q1 + a.q1 * b.q0 + a.q2 * b.q3 - a.q3 * b.q2,
          a.q0 * b.q2 - a.q1 * b.q3 + a.q2 * b.q0 + a.q3 * b.q1,
          a.q0 * b.q3 + a.q1 * b.q2 - a.q2 * b.q1 + a.q3 * b.q0};
}

Vec3 RigidTransform::apply(const Vec3& p) const {
  return rotation.matrix() * p + translation;
}

RigidTransform RigidTransform::inverse() const {
  const Quaternion inv = rotation.conjugate();
  return {inv, -(inv.matrix() * translation)};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {(a.rotation * b.rotation).normalized(),
          a.rotation.matrix() * b.translation + a.translation};
}

void PlaneMoments::add(const Vec3& p) {
  const Vec3 d = p - shift_;
  ++count_;
  sum_ += d;
  outer_ += d * d.transpose();
}

Vec3 PlaneMoments::centroid() const {
  return shift_ + sum_ / static_cast<double>(count_);
}

Mat3 PlaneMoments::scatter() const {
  const double n = static_cast<double>(count_);
  const Vec3 mean = sum_ / n;
  return outer_ - n * mean * mean.transpose();
}

PlaneParams PlaneMoments::fit() const {
  if (count_ < 3) {
    throw Error(ErrorKind::kDegenerateInput,
                "plane fit needs at least 3 points, got " +
                    std::to_string(count_));
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> solver(scatter());
  const Vec3 eval = solver.eigenvalues();  // ascending
  if (!(eval(2) > 0.0) || eval(1) <= 1e-12 * eval(2)) {
    throw Error(ErrorKind::kDegenerateInput, "points are collinear");
  }
  PlaneParams plane;
  plane.normal = solver.eigenvectors().col(0).normalized();
  plane.offset = -plane.normal.dot(centroid());
  return orient_plane(plane);
}

PlaneParams orient_plane(PlaneParams plane) {
  constexpr double kOffsetEps = 1e-9;
  constexpr double kComponentEps = 1e-12;
  bool flip = false;
  if (std::abs(plane.offset) > kOffsetEps) {
    flip = plane.offset > 0.0;
  } else if (std::abs(plane.normal.z()) > kComponentEps) {
    flip = plane.normal.z() < 0.0;
  } else if (std::abs(plane.normal.y()) > kComponentEps) {
    flip = plane.normal.y() < 0.0;
  } else {
    flip = plane.normal.x() < 0.0;
  }
  return flip ? plane.flipped() : plane;
}

PlaneParams fit_plane(std::span<const Vec3> points) {
  PlaneMoments m(points.empty() ? Vec3::Zero() : points.front());
  for (const auto& p : points) m.add(p);
  return m.fit();
}

PlaneParams fit_plane(std::span<const Vec3> points,
                      std::span<const std::size_t> indices) {
  PlaneMoments m(indices.empty() ? Vec3::Zero() : points[indices.front()]);
  for (std::size_t i : indices) m.add(points[i]);
  return m.fit();
}

double point_plane_distance(const Vec3& p, const PlaneParams& plane) {
  return std::abs(plane.signed_distance(p));
}

double rotation_angle_between_normals(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  return std::acos(c) * kDegPerRad;
}

double verticality_angle(const Vec3& normal) {
  return std::acos(std::clamp(std::abs(normal.z()), 0.0, 1.0)) * kDegPerRad;
}

double verticality_angle(const PlaneParams& plane) {
  return verticality_angle(plane.normal);
}

Vec3 apply_transform(const RigidTransform& t, const Vec3& p) {
  return t.apply(p);
}

PlaneParams transform_plane(const RigidTransform& t, const PlaneParams& plane) {
  PlaneParams out;
  out.normal = t.rotation.matrix() * plane.normal;
  out.offset = plane.offset - out.normal.dot(t.translation);
  return out;
}

double rotation_angle_between(const Quaternion& a, const Quaternion& b) {
  const Quaternion rel = a * b.conjugate();
  const double v = std::sqrt(rel.q1 * rel.q1 + rel.q2 * rel.q2 + rel.q3 * rel.q3);
  return 2.0 * std::atan2(v, std::abs(rel.q0)) * kDegPerRad;
}

}  // namespace l2mreg
