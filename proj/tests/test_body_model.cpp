#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kinebody;

namespace {

const SyntheticAssets& assets() {
  static const SyntheticAssets a = generate_synthetic_rig(3, 900, 60);
  return a;
}

Pose random_pose(Rng& rng, int joints, double limit = 1.2) {
  std::vector<Vec3> aa;
  for (int j = 0; j < joints; ++j) aa.emplace_back(rng.uniform(-limit, limit), rng.uniform(-limit, limit), rng.uniform(-limit, limit));
  return Pose::from_axis_angle(aa, Vec3(rng.normal(), rng.normal(), rng.normal()));
}

ShapeParams random_shape(Rng& rng) {
  ShapeParams s;
  for (int m = 0; m < kShapeDims; ++m) s.beta[m] = rng.normal();
  return s;
}

}  // namespace

TEST(ShapeBlend, ZeroAndUnitCoefficients) {
  const auto& rig = assets().rig;
  EXPECT_TRUE((shape_blend(rig, ShapeParams{}).array() == rig.mean_vertices.array()).all());
  ShapeParams e3;
  e3.beta[3] = 1.0;
  EXPECT_LT((shape_blend(rig, e3) - rig.mean_vertices - rig.shape_basis[3]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ShapeBlend, MatchesElementwiseSummation) {
  const auto& rig = assets().rig;
  ShapeParams s;
  s.beta[1] = 2.0;
  s.beta[2] = 3.0;
  const MatX3 got = shape_blend(rig, s);
  for (Eigen::Index i = 0; i < got.rows(); ++i)
    for (int c = 0; c < 3; ++c)
      ASSERT_NEAR(got(i, c), rig.mean_vertices(i, c) + 2.0 * rig.shape_basis[1](i, c) + 3.0 * rig.shape_basis[2](i, c),
                  1e-15);
}

TEST(ShapeBlend, AffineLinearity) {
  const auto& rig = assets().rig;
  Rng rng(4);
  const ShapeParams b1 = random_shape(rng), b2 = random_shape(rng);
  const double a = rng.normal(), b = rng.normal();
  ShapeParams mix;
  mix.beta = a * b1.beta + b * b2.beta;
  const MatX3 lhs = shape_blend(rig, mix);
  const MatX3 rhs = a * shape_blend(rig, b1) + b * shape_blend(rig, b2) - (a + b - 1.0) * rig.mean_vertices;
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardKinematics, IdentityPoseReproducesRestJoints) {
  const auto& rig = assets().rig;
  const auto posed = pose_body(rig, ShapeParams{}, Pose::identity(rig.num_joints()));
  EXPECT_TRUE((posed.joint_positions.array() == rig.rest_joint_positions.array()).all());
  EXPECT_TRUE((posed.vertices.array() == rig.mean_vertices.array()).all());
}

TEST(ForwardKinematics, TwoBoneChainRotatedAboutZ) {
  BodyRig rig;
  rig.parent_index = {kNoParent, 0, 1};
  rig.rest_joint_positions.resize(3, 3);
  rig.rest_joint_positions << 0, 0, 0, 1, 0, 0, 2, 0, 0;
  Pose pose = Pose::identity(3);
  pose.rotations[0] = axis_angle_to_matrix(Vec3(0, 0, std::numbers::pi / 2));
  const auto posed = forward_kinematics(rig, pose, rig.rest_joint_positions);
  EXPECT_LT((posed.joint_positions.row(2) - Eigen::RowVector3d(0, 2, 0)).norm(), 1e-15);
  EXPECT_LT((posed.joint_positions.row(1) - Eigen::RowVector3d(0, 1, 0)).norm(), 1e-15);
}

TEST(ForwardKinematics, MatchesChainMultiplicationOracle) {
  const auto& rig = assets().rig;
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const ShapeParams shape = random_shape(rng);
    const Pose pose = random_pose(rng, rig.num_joints());
    const MatX3 rest = shaped_rest_joints(rig, shape);
    const auto posed = forward_kinematics(rig, pose, rest);
    const auto g = oracle::fk_chain(rig.parent_index, rest, pose.rotations, pose.root_translation);
    for (int j = 0; j < rig.num_joints(); ++j) {
      ASSERT_LT((posed.joint_positions.row(j).transpose() - g[j].topRightCorner<3, 1>()).norm(), 1e-10);
      ASSERT_LT((posed.global_transforms[j].rotation - g[j].topLeftCorner<3, 3>()).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Lbs, MatchesDirectSummationOracle) {
  const auto& rig = assets().rig;
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const ShapeParams shape = random_shape(rng);
    const Pose pose = random_pose(rng, rig.num_joints());
    const auto posed = pose_body(rig, shape, pose);
    const MatX3 rest = shaped_rest_joints(rig, shape);
    const auto g = oracle::fk_chain(rig.parent_index, rest, pose.rotations, pose.root_translation);
    const MatX3 want = oracle::lbs(shape_blend(rig, shape), rig.skinning_weights, g, rest);
    EXPECT_LT((posed.vertices - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Lbs, SingleWeightFollowsTranslationAndTwoWeightsAverage) {
  BodyRig rig;
  rig.parent_index = {kNoParent, 0};
  rig.rest_joint_positions = MatX3::Zero(2, 3);
  rig.rest_joint_positions(1, 0) = 1.0;
  rig.mean_vertices.resize(2, 3);
  rig.mean_vertices << 0.5, 0.2, 0.0, 1.5, -0.3, 0.1;
  rig.skinning_weights.resize(2, 2);
  rig.skinning_weights << 1.0, 0.0, 0.5, 0.5;

  std::vector<RigidTransform> t(2, RigidTransform::identity());
  t[0].translation = Vec3(0.1, 0.2, 0.3);
  EXPECT_LT((lbs(rig.mean_vertices, rig, t).row(0) - rig.mean_vertices.row(0) - Eigen::RowVector3d(0.1, 0.2, 0.3)).norm(),
            1e-15);

  t[1].rotation = axis_angle_to_matrix(Vec3(0.3, -0.2, 0.9));
  t[1].translation = Vec3(-1, 0.5, 2);
  const Vec3 v = rig.mean_vertices.row(1);
  const Vec3 want = 0.5 * t[0].apply(v) + 0.5 * t[1].apply(v);
  EXPECT_LT((lbs(rig.mean_vertices, rig, t).row(1).transpose() - want).norm(), 1e-15);
}

TEST(Lbs, RigidInvarianceOfRootTransform) {
  const auto& rig = assets().rig;
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const ShapeParams shape = random_shape(rng);
    Pose pose = random_pose(rng, rig.num_joints());
    const auto base = pose_body(rig, shape, pose);
    const Mat3 q = axis_angle_to_matrix(Vec3(rng.normal(), rng.normal(), rng.normal()));
    const Vec3 t(rng.normal(), rng.normal(), rng.normal());
    // Rigid motion x -> q x + t applied through the root joint.
    const Vec3 root = shaped_rest_joints(rig, shape).row(rig.root());
    Pose moved = pose;
    moved.rotations[rig.root()] = q * pose.rotations[rig.root()];
    moved.root_translation = q * (root + pose.root_translation) + t - root;
    const auto out = pose_body(rig, shape, moved);
    const MatX3 want = (base.vertices * q.transpose()).rowwise() + t.transpose();
    EXPECT_LT((out.vertices - want).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Keypoints, RootRelativeAndDisjointSubsets) {
  const auto& rig = assets().rig;
  const auto kp = regress_keypoints(pose_body(rig, ShapeParams{}, Pose::identity(rig.num_joints())), rig);
  const MatX3 want = rig.rest_joint_positions.rowwise() - rig.rest_joint_positions.row(rig.root());
  EXPECT_LT((kp.keypoints - want).cwiseAbs().maxCoeff(), 1e-15);
  Rng rng(8);
  const auto kp2 = regress_keypoints(pose_body(rig, random_shape(rng), random_pose(rng, rig.num_joints())), rig);
  EXPECT_EQ(kp2.keypoints.row(rig.root()).norm(), 0.0);
  std::vector<int> all = kp2.basic_ids;
  all.insert(all.end(), kp2.extended_ids.begin(), kp2.extended_ids.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  EXPECT_EQ(kp2.basic().rows() + kp2.extended().rows(), static_cast<Eigen::Index>(all.size()));
}

TEST(Pose, InvalidRotationsAreRejected) {
  const auto& rig = assets().rig;
  Pose p = Pose::identity(rig.num_joints());
  p.rotations[4](0, 0) = 1.1;
  try {
    pose_body(rig, ShapeParams{}, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvariantViolation);
  }
  p = Pose::identity(5);
  EXPECT_THROW(pose_body(rig, ShapeParams{}, p), Error);
}
