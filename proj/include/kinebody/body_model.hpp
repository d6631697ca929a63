#pragma once

// Shape blending, forward kinematics and linear blend skinning.
//
// Skinning uses the rest-relative convention: each joint's skinning
// transform is its posed global transform composed with the inverse of its
// rest global transform, so the identity pose reproduces the template.
// Pose-dependent corrective blendshapes are not modelled.

#include "kinebody/assets.hpp"
#include "kinebody/rotation.hpp"
#include "kinebody/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace kinebody {

struct ShapeParams {
  VecX beta = VecX::Zero(kShapeDims);

  static ShapeParams zero() { return {}; }
};

/// Per-joint rotations (body joints first, then hands) plus root translation.
struct Pose {
  std::vector<Mat3> rotations;
  Vec3 root_translation = Vec3::Zero();

  static Pose identity(int joints = kTotalJoints) {
    Pose p;
    p.rotations.assign(static_cast<std::size_t>(joints), Mat3::Identity());
    return p;
  }

  static Pose from_axis_angle(const std::vector<Vec3>& aa, const Vec3& translation = Vec3::Zero()) {
    Pose p;
    for (const auto& v : aa) p.rotations.push_back(axis_angle_to_matrix(v));
    p.root_translation = translation;
    return p;
  }
};

struct PosedBody {
  MatX3 vertices;
  MatX3 joint_positions;
  std::vector<RigidTransform> global_transforms;    // G_j: joint frame to world
  std::vector<RigidTransform> skinning_transforms;  // G_j composed with rest G_j^-1
};

struct KeypointSet {
  MatX3 keypoints;  // root-relative, one row per joint
  std::vector<int> basic_ids;
  std::vector<int> extended_ids;

  MatX3 select(const std::vector<int>& ids) const {
    MatX3 out(static_cast<Eigen::Index>(ids.size()), 3);
    for (std::size_t k = 0; k < ids.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = keypoints.row(ids[k]);
    return out;
  }
  MatX3 basic() const { return select(basic_ids); }
  MatX3 extended() const { return select(extended_ids); }
};

inline void validate(const ShapeParams& shape) {
  require_dims(static_cast<std::size_t>(shape.beta.size()), kShapeDims, "beta length");
  require(shape.beta.allFinite(), ErrorKind::InvalidArgument, "beta must be finite");
}

inline void validate(const Pose& pose, int joints) {
  require_dims(pose.rotations.size(), static_cast<std::size_t>(joints), "pose rotation count");
  for (std::size_t j = 0; j < pose.rotations.size(); ++j)
    require(is_rotation(pose.rotations[j], 1e-8), ErrorKind::InvariantViolation,
            "pose rotation " + std::to_string(j) + " is not a proper rotation");
  require(pose.root_translation.allFinite(), ErrorKind::InvalidArgument, "root translation must be finite");
}

/// T_B = mean + sum_k beta_k * basis_k.
inline MatX3 shape_blend(const BodyRig& rig, const ShapeParams& shape) {
  require_dims(static_cast<std::size_t>(shape.beta.size()), rig.shape_basis.size(), "beta length vs shape basis");
  MatX3 out = rig.mean_vertices;
  for (std::size_t k = 0; k < rig.shape_basis.size(); ++k) {
    require(rig.shape_basis[k].rows() == rig.mean_vertices.rows(), ErrorKind::DimensionMismatch,
            "shape_basis component " + std::to_string(k) + " row count");
    if (shape.beta[static_cast<Eigen::Index>(k)] != 0.0) out += shape.beta[static_cast<Eigen::Index>(k)] * rig.shape_basis[k];
  }
  return out;
}

/// Joint regressor: column-normalized skinning weights (J x N_B). Each
/// joint is the weight-averaged position of the vertices it drives.
inline MatX joint_regressor(const BodyRig& rig) {
  MatX reg = rig.skinning_weights.transpose();
  for (Eigen::Index j = 0; j < reg.rows(); ++j) {
    const double s = reg.row(j).sum();
    if (s > 0.0) reg.row(j) /= s;
  }
  return reg;
}

/// Per-component joint displacement (16 of J x 3): regressor applied to the
/// shape basis.
inline std::vector<MatX3> joint_shape_basis(const BodyRig& rig) {
  const MatX reg = joint_regressor(rig);
  std::vector<MatX3> out;
  out.reserve(rig.shape_basis.size());
  for (const auto& b : rig.shape_basis) out.push_back(reg * b);
  return out;
}

/// Rest joints for a given shape: the rig's rest joints displaced by the
/// regressed shape offset. Linear in beta.
inline MatX3 shaped_rest_joints(const BodyRig& rig, const ShapeParams& shape) {
  MatX3 out = rig.rest_joint_positions;
  const MatX reg = joint_regressor(rig);
  const MatX3 offset = shape_blend(rig, shape) - rig.mean_vertices;
  out += reg * offset;
  return out;
}

/// Root: G_root = (R_root, rest_root + root_translation). Child:
/// G_c = G_parent * (R_c, rest_c - rest_parent).
///
/// The rest-relative transforms A_j = G_j * (I, -rest_j) are composed
/// directly, A_c = A_p * (R_c, rest_c - R_c rest_c), so that an identity
/// pose yields exactly (I, 0) for every joint.
inline PosedBody forward_kinematics(const BodyRig& rig, const Pose& pose, const MatX3& rest_joints) {
  const int nj = rig.num_joints();
  validate(pose, nj);
  require(rest_joints.rows() == nj, ErrorKind::DimensionMismatch, "rest_joints must have J rows");
  PosedBody out;
  out.global_transforms.resize(nj);
  out.skinning_transforms.resize(nj);
  out.joint_positions.resize(nj, 3);
  for (int j = 0; j < nj; ++j) {
    const int p = rig.parent_index[j];
    const Vec3 rest = rest_joints.row(j);
    const Mat3& r = pose.rotations[j];
    const RigidTransform local{r, rest - r * rest};
    if (p == kNoParent) {
      out.skinning_transforms[j] = {r, (rest + pose.root_translation) - r * rest};
    } else {
      out.skinning_transforms[j] = out.skinning_transforms[p] * local;
    }
    const auto& a = out.skinning_transforms[j];
    out.global_transforms[j] = {a.rotation, a.apply(rest)};
    out.joint_positions.row(j) = out.global_transforms[j].translation;
  }
  return out;
}

/// v_i' = sum_j w_ij A_j v_i, evaluated as v_i + sum_j w_ij (A_j v_i - v_i)
/// (equal for unit-sum weights, and exact for identity transforms).
inline MatX3 lbs(const MatX3& shaped, const BodyRig& rig, const std::vector<RigidTransform>& skinning) {
  const Eigen::Index nv = shaped.rows();
  require(rig.skinning_weights.rows() == nv, ErrorKind::DimensionMismatch, "skinning weights vs vertex count");
  require_dims(skinning.size(), static_cast<std::size_t>(rig.skinning_weights.cols()), "transform count");
  MatX3 out = MatX3::Zero(nv, 3);
  for (Eigen::Index i = 0; i < nv; ++i) {
    const Vec3 v = shaped.row(i);
    Vec3 acc = Vec3::Zero();
    for (Eigen::Index j = 0; j < rig.skinning_weights.cols(); ++j) {
      const double w = rig.skinning_weights(i, j);
      if (w != 0.0) acc += w * (skinning[static_cast<std::size_t>(j)].apply(v) - v);
    }
    out.row(i) = v + acc;
  }
  return out;
}

/// Shape blend, FK on the shaped rest joints, then LBS.
inline PosedBody pose_body(const BodyRig& rig, const ShapeParams& shape, const Pose& pose) {
  validate(shape);
  const MatX3 shaped = shape_blend(rig, shape);
  PosedBody posed = forward_kinematics(rig, pose, shaped_rest_joints(rig, shape));
  posed.vertices = lbs(shaped, rig, posed.skinning_transforms);
  return posed;
}

inline KeypointSet regress_keypoints(const PosedBody& posed, const BodyRig& rig) {
  KeypointSet out;
  const int root = rig.root();
  out.keypoints = posed.joint_positions.rowwise() - posed.joint_positions.row(root);
  out.basic_ids = rig.basic_keypoint_ids;
  out.extended_ids = rig.extended_keypoint_ids;
  return out;
}

inline double mean_bone_length(const BodyRig& rig, const std::vector<int>& joints) {
  double sum = 0.0;
  int n = 0;
  for (int j : joints) {
    const int p = rig.parent_index[j];
    if (p == kNoParent) continue;
    sum += (rig.rest_joint_positions.row(j) - rig.rest_joint_positions.row(p)).norm();
    ++n;
  }
  return n ? sum / n : 0.0;
}

}  // namespace kinebody
