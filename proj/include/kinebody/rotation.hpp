#pragma once

#include "kinebody/types.hpp"

#include <cmath>
#include <string>

namespace kinebody {

/// Rodrigues' formula. Zero vector maps to the identity.
inline Mat3 axis_angle_to_matrix(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-14) {
    Mat3 k;
    k << 0, -aa.z(), aa.y(), aa.z(), 0, -aa.x(), -aa.y(), aa.x(), 0;
    return Mat3::Identity() + k;
  }
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

inline Vec3 matrix_to_axis_angle(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

/// Checks RᵀR = I and det R = +1 within `tol`.
inline bool is_rotation(const Mat3& r, double tol = 1e-8) {
  return ((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

// 6D rotation representation: two 3-vectors (a1, a2) = first two columns of R
// up to Gram-Schmidt. b1 = a1/|a1|, b2 = normalized (a2 - (b1.a2) b1),
// b3 = b1 x b2, R = [b1 b2 b3].

inline constexpr double kRot6dDegeneracy = 1e-8;

inline Mat3 rot6d_to_matrix(const Vec6& r6) {
  const Vec3 a1 = r6.head<3>();
  const Vec3 a2 = r6.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 > kRot6dDegeneracy)) throw Error(ErrorKind::Degenerate, "6D rotation: first vector is near zero");
  const Vec3 b1 = a1 / n1;
  const Vec3 u = a2 - b1.dot(a2) * b1;
  const double nu = u.norm();
  if (!(nu > kRot6dDegeneracy * std::max(1.0, a2.norm())))
    throw Error(ErrorKind::Degenerate, "6D rotation: second vector is parallel to the first");
  const Vec3 b2 = u / nu;
  Mat3 out;
  out.col(0) = b1;
  out.col(1) = b2;
  out.col(2) = b1.cross(b2);
  return out;
}

inline Vec6 matrix_to_rot6d(const Mat3& r) {
  Vec6 out;
  out.head<3>() = r.col(0);
  out.tail<3>() = r.col(1);
  return out;
}

/// Reverse-mode derivative of rot6d_to_matrix: maps dL/dR to dL/d(a1, a2).
inline Vec6 rot6d_to_matrix_backward(const Vec6& r6, const Mat3& grad_r) {
  const Vec3 a1 = r6.head<3>();
  const Vec3 a2 = r6.tail<3>();
  const double n1 = a1.norm();
  const Vec3 b1 = a1 / n1;
  const double proj = b1.dot(a2);
  const Vec3 u = a2 - proj * b1;
  const double nu = u.norm();
  const Vec3 b2 = u / nu;

  Vec3 g1 = grad_r.col(0);
  Vec3 g2 = grad_r.col(1);
  const Vec3 g3 = grad_r.col(2);
  // b3 = b1 x b2
  g1 += b2.cross(g3);
  g2 += g3.cross(b1);
  // b2 = u / |u|
  const Vec3 gu = (g2 - b2 * b2.dot(g2)) / nu;
  // u = a2 - (b1.a2) b1
  const Vec3 ga2 = gu - b1 * b1.dot(gu);
  g1 -= proj * gu + b1.dot(gu) * a2;
  // b1 = a1 / |a1|
  const Vec3 ga1 = (g1 - b1 * b1.dot(g1)) / n1;

  Vec6 out;
  out.head<3>() = ga1;
  out.tail<3>() = ga2;
  return out;
}

}  // namespace kinebody
