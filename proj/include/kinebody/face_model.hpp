#pragma once

// Morphable face geometry and reflectance, spherical-harmonics shading, and
// placement of the face onto the posed body.

#include "kinebody/assets.hpp"
#include "kinebody/body_model.hpp"
#include "kinebody/mesh.hpp"
#include "kinebody/types.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <vector>

namespace kinebody {

using ShCoefficients = Eigen::Matrix<double, 3, kShBands>;  // one row per color channel

struct FaceParams {
  VecX zeta = VecX::Zero(kFaceShapeDims);
  VecX epsilon = VecX::Zero(kFaceExpressionDims);
  VecX gamma = VecX::Zero(kFaceAlbedoDims);
  ShCoefficients mu = ShCoefficients::Zero();
};

struct ShadedFace {
  MatX3 vertices;
  MatX3 reflectance;
  MatX3 radiosity;
  MatX3 normals;
};

inline void validate(const FaceParams& p) {
  require_dims(static_cast<std::size_t>(p.zeta.size()), kFaceShapeDims, "zeta length");
  require_dims(static_cast<std::size_t>(p.epsilon.size()), kFaceExpressionDims, "epsilon length");
  require_dims(static_cast<std::size_t>(p.gamma.size()), kFaceAlbedoDims, "gamma length");
  require(p.zeta.allFinite() && p.epsilon.allFinite() && p.gamma.allFinite() && p.mu.allFinite(),
          ErrorKind::InvalidArgument, "face parameters must be finite");
}

namespace detail {

inline MatX3 blend(const MatX3& mean, const std::vector<MatX3>& basis, const VecX& coeffs, const char* what) {
  require_dims(static_cast<std::size_t>(coeffs.size()), basis.size(), std::string(what) + " coefficient count");
  MatX3 out = mean;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    require(basis[k].rows() == mean.rows(), ErrorKind::DimensionMismatch, std::string(what) + " basis row count");
    const double c = coeffs[static_cast<Eigen::Index>(k)];
    if (c != 0.0) out += c * basis[k];
  }
  return out;
}

}  // namespace detail

/// V_F = mean + zeta E_zeta + epsilon E_epsilon.
inline MatX3 face_geometry(const FaceAsset& asset, const VecX& zeta, const VecX& epsilon) {
  MatX3 shaped = detail::blend(asset.mean_face, asset.shape_basis, zeta, "zeta");
  return detail::blend(shaped, asset.expression_basis, epsilon, "epsilon");
}

enum class Clamp { No, Yes };

/// R = mean + gamma E_gamma, clamped to [0, 1] afterwards unless told not to.
inline MatX3 face_reflectance(const FaceAsset& asset, const VecX& gamma, Clamp clamp = Clamp::Yes) {
  MatX3 r = detail::blend(asset.mean_reflectance, asset.reflectance_basis, gamma, "gamma");
  if (clamp == Clamp::Yes) r = r.cwiseMax(0.0).cwiseMin(1.0);
  return r;
}

/// Area-weighted vertex normals. Vertices touched by no (nondegenerate)
/// triangle are reported together in one error.
inline MatX3 vertex_normals(const MatX3& vertices, const std::vector<Triangle>& triangles) {
  MatX3 acc = MatX3::Zero(vertices.rows(), 3);
  for (const auto& t : triangles) {
    for (int v : t)
      require(v >= 0 && v < vertices.rows(), ErrorKind::InvalidArgument, "triangle index out of range");
    const Vec3 a = vertices.row(t[0]), b = vertices.row(t[1]), c = vertices.row(t[2]);
    const Vec3 n = (b - a).cross(c - a);  // |n| = 2 * area
    for (int v : t) acc.row(v) += n;
  }
  std::vector<int> bad;
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double len = acc.row(i).norm();
    if (!(len > 1e-300)) {
      bad.push_back(static_cast<int>(i));
      continue;
    }
    acc.row(i) /= len;
  }
  if (!bad.empty()) {
    std::string ids;
    for (std::size_t k = 0; k < bad.size() && k < 32; ++k) ids += (k ? "," : "") + std::to_string(bad[k]);
    if (bad.size() > 32) ids += ",...";
    throw Error(ErrorKind::Degenerate, "zero-length normal at vertices [" + ids + "]");
  }
  return acc;
}

// Real orthonormal spherical harmonics, bands 0..2, no Condon-Shortley phase.
// Order: Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22.
//   Y00  = 1 / (2 sqrt(pi))
//   Y1m  = sqrt(3 / (4 pi)) * (y, z, x)
//   Y2-2 = sqrt(15 / (4 pi)) xy,   Y2-1 = sqrt(15 / (4 pi)) yz
//   Y20  = sqrt(5 / (16 pi)) (3z^2 - 1)
//   Y21  = sqrt(15 / (4 pi)) xz,   Y22  = sqrt(15 / (16 pi)) (x^2 - y^2)
namespace sh {
inline const double kY00 = 0.5 / std::sqrt(std::numbers::pi);
inline const double kY1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));
inline const double kY2 = std::sqrt(15.0 / (4.0 * std::numbers::pi));
inline const double kY20 = std::sqrt(5.0 / (16.0 * std::numbers::pi));
inline const double kY22 = std::sqrt(15.0 / (16.0 * std::numbers::pi));
}  // namespace sh

inline Eigen::Matrix<double, kShBands, 1> sh_basis(const Vec3& n) {
  const double x = n.x(), y = n.y(), z = n.z();
  Eigen::Matrix<double, kShBands, 1> h;
  h << sh::kY00, sh::kY1 * y, sh::kY1 * z, sh::kY1 * x, sh::kY2 * x * y, sh::kY2 * y * z,
      sh::kY20 * (3.0 * z * z - 1.0), sh::kY2 * x * z, sh::kY22 * (x * x - y * y);
  return h;
}

/// t_i[c] = r_i[c] * sum_b mu[c][b] H_b(n_i).
inline MatX3 sh_shade(const MatX3& reflectance, const MatX3& normals, const ShCoefficients& mu) {
  require(reflectance.rows() == normals.rows(), ErrorKind::DimensionMismatch, "reflectance vs normals row count");
  MatX3 out(reflectance.rows(), 3);
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const Vec3 n = normals.row(i);
    if (std::abs(n.norm() - 1.0) > 1e-6)
      throw Error(ErrorKind::InvalidArgument, "normal " + std::to_string(i) + " is not unit length");
    const Vec3 irradiance = mu * sh_basis(n);
    out.row(i) = reflectance.row(i).cwiseProduct(irradiance.transpose());
  }
  return out;
}

/// Coefficients of the rotated lighting: with mu' = sh_rotate(mu, Q),
/// sum_b mu'_b H_b(Q n) = sum_b mu_b H_b(n). Band 1 is the vector
/// (c11, c1-1, c10) and band 2 the traceless quadratic form n^T S n; both
/// rotate as tensors.
inline ShCoefficients sh_rotate(const ShCoefficients& mu, const Mat3& q) {
  ShCoefficients out;
  const double h2 = 0.5 * sh::kY2;
  for (int c = 0; c < 3; ++c) {
    const auto m = mu.row(c);
    out(c, 0) = m(0);
    const Vec3 v = q * Vec3(m(3), m(1), m(2));
    out(c, 1) = v.y();
    out(c, 2) = v.z();
    out(c, 3) = v.x();
    Mat3 s;
    s << sh::kY22 * m(8) - sh::kY20 * m(6), h2 * m(4), h2 * m(7),  //
        h2 * m(4), -sh::kY22 * m(8) - sh::kY20 * m(6), h2 * m(5),  //
        h2 * m(7), h2 * m(5), 2.0 * sh::kY20 * m(6);
    const Mat3 r = q * s * q.transpose();
    out(c, 4) = r(0, 1) / h2;
    out(c, 5) = r(1, 2) / h2;
    out(c, 6) = r(2, 2) / (2.0 * sh::kY20);
    out(c, 7) = r(0, 2) / h2;
    out(c, 8) = (r(0, 0) - r(1, 1)) / (2.0 * sh::kY22);
  }
  return out;
}

inline ShadedFace shade_face(const FaceAsset& asset, const FaceParams& params) {
  validate(params);
  ShadedFace out;
  out.vertices = face_geometry(asset, params.zeta, params.epsilon);
  out.reflectance = face_reflectance(asset, params.gamma);
  out.normals = vertex_normals(out.vertices, asset.triangles);
  out.radiosity = sh_shade(out.reflectance, out.normals, params.mu);
  return out;
}

// ---------------------------------------------------------------------------
// Face-body merge.

struct MergedMesh {
  MatX3 vertices;                   // kept body vertices, then face vertices
  std::vector<int> body_to_merged;  // -1 for body vertices inside the face region
  int face_offset = 0;              // merged index of face vertex 0
  std::vector<Triangle> stitch_triangles;
};

/// Rotation of the head joint relative to its rest frame, read from a posed
/// body. Rest global frames carry no rotation, so this is the global rotation.
inline Mat3 head_rotation(const PosedBody& body, const MergeSpec& spec) {
  return body.global_transforms.at(static_cast<std::size_t>(spec.neck_joint_id)).rotation;
}

inline constexpr double kMaxStitchLengthRatio = 4.0;

/// Places the face on the posed body.
///
/// Face vertices are mapped into the rest body frame by the merge spec's scaled
/// rigid transform, then rotated by `head_rot` about the rest neck joint and
/// carried to the posed neck joint: p' = neck_posed + head_rot (p - neck_rest).
/// Body vertices in the merge spec's face region are dropped; the rest are copied
/// unchanged. The two boundary loops are joined by a zipper over their
/// normalized arc-length parameters; B_b[0] corresponds to B_f[0] and both
/// loops run in the same direction.
inline MergedMesh merge_face_body(const PosedBody& body, const BodyRig& rig, const MatX3& face_vertices,
                                  const FaceAsset& face, const MergeSpec& spec, const Mat3& head_rot) {
  require(body.vertices.rows() == rig.num_vertices(), ErrorKind::DimensionMismatch, "posed body vertex count");
  require(face_vertices.rows() == face.num_vertices(), ErrorKind::DimensionMismatch, "face vertex count");
  require(is_rotation(head_rot, 1e-8), ErrorKind::InvalidArgument, "head rotation is not a proper rotation");
  const auto nb = spec.body_boundary_loop.size();
  const auto nf = face.boundary_loop.size();
  if (nb < 3 || nf < 3)
    throw Error(ErrorKind::Degenerate, "boundary loops need at least 3 vertices each");
  const double ratio = static_cast<double>(std::max(nb, nf)) / static_cast<double>(std::min(nb, nf));
  if (ratio > kMaxStitchLengthRatio)
    throw Error(ErrorKind::Degenerate, "boundary loop lengths " + std::to_string(nb) + " and " + std::to_string(nf) +
                                           " differ too much for a nondegenerate stitch");

  MergedMesh out;
  const std::set<int> region(spec.face_region.begin(), spec.face_region.end());
  const Eigen::Index kept = body.vertices.rows() - static_cast<Eigen::Index>(region.size());
  out.vertices.resize(kept + face_vertices.rows(), 3);
  out.body_to_merged.assign(static_cast<std::size_t>(body.vertices.rows()), -1);
  Eigen::Index next = 0;
  for (Eigen::Index i = 0; i < body.vertices.rows(); ++i) {
    if (region.count(static_cast<int>(i))) continue;
    out.body_to_merged[static_cast<std::size_t>(i)] = static_cast<int>(next);
    out.vertices.row(next++) = body.vertices.row(i);
  }
  out.face_offset = static_cast<int>(next);

  const Vec3 neck_rest = rig.rest_joint_positions.row(spec.neck_joint_id);
  const Vec3 neck_posed = body.joint_positions.row(spec.neck_joint_id);
  for (Eigen::Index i = 0; i < face_vertices.rows(); ++i) {
    const Vec3 aligned = spec.apply(face_vertices.row(i).transpose());
    out.vertices.row(next++) = neck_posed + head_rot * (aligned - neck_rest);
  }

  std::vector<int> body_loop, face_loop;
  for (int v : spec.body_boundary_loop) body_loop.push_back(out.body_to_merged.at(static_cast<std::size_t>(v)));
  for (int v : face.boundary_loop) face_loop.push_back(out.face_offset + v);
  out.stitch_triangles = zipper_loops(face_loop, loop_arc_parameters(out.vertices, face_loop), body_loop,
                                      loop_arc_parameters(out.vertices, body_loop));

  double mean_edge = 0.0;
  for (const auto& t : out.stitch_triangles)
    for (int e = 0; e < 3; ++e) mean_edge += (out.vertices.row(t[e]) - out.vertices.row(t[(e + 1) % 3])).norm();
  mean_edge /= 3.0 * static_cast<double>(out.stitch_triangles.size());
  for (const auto& t : out.stitch_triangles) {
    const Vec3 a = out.vertices.row(t[0]), b = out.vertices.row(t[1]), c = out.vertices.row(t[2]);
    if ((b - a).cross(c - a).norm() <= 1e-10 * mean_edge * mean_edge)
      throw Error(ErrorKind::Degenerate, "stitch produced a degenerate triangle");
  }
  return out;
}

}  // namespace kinebody
