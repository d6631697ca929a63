#pragma once

// Closed-form global translation from one bone of known length, similarity
// (Procrustes) alignment, and the evaluation metrics.

#include "kinebody/types.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace kinebody {

struct Camera {
  Mat3 intrinsics = Mat3::Identity();

  static Camera from_params(double fx, double fy, double cx, double cy, double skew = 0.0) {
    Camera c;
    c.intrinsics << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return c;
  }

  Vec2 project(const Vec3& p) const {
    const Vec3 q = intrinsics * p;
    return {q.x() / q.z(), q.y() / q.z()};
  }

  /// Ray direction with unit depth: C^-1 (u, v, 1).
  Vec3 back_project(const Vec2& uv) const { return intrinsics.inverse() * Vec3(uv.x(), uv.y(), 1.0); }
};

inline void validate(const Camera& c) {
  const Mat3& k = c.intrinsics;
  require(k.allFinite(), ErrorKind::InvalidArgument, "intrinsics must be finite");
  require(k(1, 0) == 0.0 && k(2, 0) == 0.0 && k(2, 1) == 0.0 && k(2, 2) == 1.0, ErrorKind::InvalidArgument,
          "intrinsics must be upper triangular with C(2,2) = 1");
  require(k(0, 0) > 0.0 && k(1, 1) > 0.0, ErrorKind::InvalidArgument, "focal lengths must be positive");
}

struct TranslationProblem {
  Vec2 parent_2d = Vec2::Zero();
  Vec2 child_2d = Vec2::Zero();
  double parent_depth = 0.0;  // root-relative
  double child_depth = 0.0;   // root-relative
  double bone_length = 0.0;
  Camera camera;
  /// Root-relative 3D position of the parent keypoint, used to turn the
  /// parent's camera-space position into the root translation.
  Vec3 parent_relative = Vec3::Zero();
};

struct TranslationSolution {
  std::vector<double> roots;       // every real root of the quadratic, ascending
  std::vector<double> admissible;  // roots with z_p > 0 and z_p + delta > 0
  double depth = 0.0;              // selected parent depth z_p
  Vec3 parent_camera = Vec3::Zero();
  Vec3 translation = Vec3::Zero();  // camera-space root position
};

/// Solves l = || z a - (z + delta) b || for the parent depth z, where
/// a = C^-1 (u_p, v_p, 1), b = C^-1 (u_c, v_c, 1) and delta = d_c - d_p:
///   |a - b|^2 z^2 - 2 delta (a - b).b z + delta^2 |b|^2 - l^2 = 0.
/// Among admissible roots (both keypoints in front of the camera) the larger
/// is selected.
inline TranslationSolution solve_global_translation(const TranslationProblem& p) {
  validate(p.camera);
  require(p.bone_length > 0.0 && std::isfinite(p.bone_length), ErrorKind::InvalidArgument, "bone length must be > 0");
  const Vec3 a = p.camera.back_project(p.parent_2d);
  const Vec3 b = p.camera.back_project(p.child_2d);
  const double delta = p.child_depth - p.parent_depth;
  const Vec3 d = a - b;
  const double qa = d.squaredNorm();
  const double qb = -2.0 * delta * d.dot(b);
  const double qc = delta * delta * b.squaredNorm() - p.bone_length * p.bone_length;
  if (qa <= 1e-300 * std::max(1.0, b.squaredNorm()))
    throw Error(ErrorKind::Degenerate, "parent and child rays coincide; depth is not determined by the bone length");

  TranslationSolution out;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) throw Error(ErrorKind::Infeasible, "bone length is not reachable between the two rays");
  const double sq = std::sqrt(disc);
  // Numerically stable pair: q = -(b + sign(b) sqrt(disc)) / 2, roots q/a and c/q.
  const double q = -0.5 * (qb + std::copysign(sq, qb));
  double r1 = q / qa;
  double r2 = q != 0.0 ? qc / q : -r1;
  if (r1 > r2) std::swap(r1, r2);
  out.roots = {r1, r2};
  for (double z : out.roots)
    if (z > 0.0 && z + delta > 0.0) out.admissible.push_back(z);
  if (out.admissible.empty())
    throw Error(ErrorKind::Infeasible, "no root places both keypoints in front of the camera");
  out.depth = out.admissible.back();
  out.parent_camera = out.depth * a;
  out.translation = out.parent_camera - p.parent_relative;
  return out;
}

struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  MatX3 apply(const MatX3& pts) const {
    MatX3 out = (scale * (pts * rotation.transpose())).rowwise() + translation.transpose();
    return out;
  }
};

struct ProcrustesResult {
  SimilarityTransform transform;
  MatX3 aligned;
};

/// Similarity transform minimizing sum_i |s R pred_i + t - gt_i|^2 (Umeyama),
/// with the reflection guard keeping R proper.
inline ProcrustesResult procrustes_align(const MatX3& pred, const MatX3& gt) {
  require(pred.rows() == gt.rows(), ErrorKind::DimensionMismatch, "procrustes point counts differ");
  require(pred.rows() >= 3, ErrorKind::InvalidArgument, "procrustes needs at least 3 points");
  const auto n = static_cast<double>(pred.rows());
  const Vec3 mu_p = pred.colwise().mean();
  const Vec3 mu_g = gt.colwise().mean();
  const MatX3 x = pred.rowwise() - mu_p.transpose();
  const MatX3 y = gt.rowwise() - mu_g.transpose();
  const double var_p = x.squaredNorm() / n;
  if (!(var_p > 0.0) || !(y.squaredNorm() > 0.0))
    throw Error(ErrorKind::Degenerate, "procrustes: all points coincide");
  const Mat3 cov = y.transpose() * x / n;
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sign(1.0, 1.0, 1.0);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) sign.z() = -1.0;
  ProcrustesResult out;
  out.transform.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.transform.scale = svd.singularValues().dot(sign) / var_p;
  out.transform.translation = mu_g - out.transform.scale * out.transform.rotation * mu_p;
  out.aligned = out.transform.apply(pred);
  return out;
}

enum class MpjpeMode { RootRelative, Procrustes };

inline constexpr double kMetersToMillimeters = 1000.0;

/// Per-joint Euclidean errors in millimeters after the selected alignment.
/// Inputs are in meters; root-relative mode subtracts joint `root` from each set.
inline VecX per_joint_errors(const MatX3& pred, const MatX3& gt, MpjpeMode mode, int root = 0) {
  require(pred.rows() == gt.rows(), ErrorKind::DimensionMismatch, "joint counts differ");
  require(pred.rows() > 0, ErrorKind::InvalidArgument, "no joints");
  MatX3 p, g;
  if (mode == MpjpeMode::RootRelative) {
    require(root >= 0 && root < pred.rows(), ErrorKind::InvalidArgument, "root index out of range");
    p = pred.rowwise() - pred.row(root);
    g = gt.rowwise() - gt.row(root);
  } else {
    p = procrustes_align(pred, gt).aligned;
    g = gt;
  }
  return (p - g).rowwise().norm() * kMetersToMillimeters;
}

inline double mpjpe(const MatX3& pred, const MatX3& gt, MpjpeMode mode, int root = 0) {
  return per_joint_errors(pred, gt, mode, root).mean();
}

/// Mean Euclidean distance in pixels.
inline double landmark_error(const MatX2& pred, const MatX2& gt) {
  require(pred.rows() == gt.rows(), ErrorKind::DimensionMismatch, "landmark counts differ");
  require(pred.rows() > 0, ErrorKind::InvalidArgument, "no landmarks");
  return (pred - gt).rowwise().norm().mean();
}

/// Mean absolute difference per color channel.
inline Vec3 photometric_error(const MatX3& pred, const MatX3& gt) {
  require(pred.rows() == gt.rows(), ErrorKind::DimensionMismatch, "color counts differ");
  require(pred.rows() > 0, ErrorKind::InvalidArgument, "no colors");
  return (pred - gt).cwiseAbs().colwise().mean().transpose();
}

struct MetricReport {
  double mpjpe = 0.0;     // root-relative, mm
  double mpjpe_pa = 0.0;  // Procrustes-aligned, mm
  VecX per_joint;         // mm, for the requested mode
  std::optional<double> landmark_error;
  std::optional<Vec3> photometric_error;
};

}  // namespace kinebody
