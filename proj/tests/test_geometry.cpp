#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kinebody;

namespace {

MatX3 random_points(Rng& rng, int n) {
  MatX3 m(n, 3);
  for (int i = 0; i < n; ++i) m.row(i) = Vec3(rng.normal(), rng.normal(), rng.normal());
  return m;
}

SimilarityTransform random_similarity(Rng& rng) {
  SimilarityTransform t;
  t.rotation = axis_angle_to_matrix(Vec3(rng.normal(), rng.normal(), rng.normal()));
  t.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
  t.scale = rng.uniform(0.5, 2.0);
  return t;
}

ErrorKind kind_of(const TranslationProblem& p) {
  try {
    solve_global_translation(p);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // sentinel: nothing thrown
}

}  // namespace

TEST(Translation, EqualDepthBoneAtFourMeters) {
  TranslationProblem p;
  p.parent_2d = Vec2(0, 0);
  p.child_2d = Vec2(0.075, 0);
  p.bone_length = 0.3;
  const auto s = solve_global_translation(p);
  EXPECT_NEAR(s.depth, 4.0, 1e-12);
  EXPECT_LT((s.translation - Vec3(0, 0, 4)).norm(), 1e-12);
  // delta = 0 gives the symmetric pair +-4; only +4 is in front of the camera.
  ASSERT_EQ(s.roots.size(), 2u);
  EXPECT_NEAR(s.roots[0], -4.0, 1e-12);
  EXPECT_EQ(s.admissible.size(), 1u);
}

TEST(Translation, DegenerateAndInfeasibleCases) {
  TranslationProblem p;
  p.parent_2d = p.child_2d = Vec2(0.1, 0.2);
  p.bone_length = 0.3;
  EXPECT_EQ(kind_of(p), ErrorKind::Degenerate);

  // Rays 0.01 apart per unit depth, child 5 m deeper, bone 1 m: unreachable.
  p.child_2d = Vec2(0.11, 0.2);
  p.child_depth = 5.0;
  p.bone_length = 1.0;
  EXPECT_EQ(kind_of(p), ErrorKind::Infeasible);

  // Both roots negative: child far behind the parent along the same ray.
  TranslationProblem q;
  q.parent_2d = Vec2(0, 0);
  q.child_2d = Vec2(0.075, 0);
  q.bone_length = 0.3;
  q.parent_depth = 0.0;
  q.child_depth = -100.0;
  EXPECT_EQ(kind_of(q), ErrorKind::Infeasible);

  p.bone_length = 0.0;
  EXPECT_EQ(kind_of(p), ErrorKind::InvalidArgument);
  p.bone_length = 1.0;
  p.camera.intrinsics(0, 0) = -1.0;
  EXPECT_EQ(kind_of(p), ErrorKind::InvalidArgument);
}

TEST(Translation, RecoversSynthesizedDepths) {
  Rng rng(1);
  int unique = 0;
  for (int i = 0; i < 500; ++i) {
    const auto inst = oracle::synth_translation(rng);
    const auto s = solve_global_translation(inst.problem);
    double best = std::numeric_limits<double>::infinity();
    for (double z : s.roots) best = std::min(best, std::abs(z - inst.true_depth));
    ASSERT_LT(best, 1e-9) << "instance " << i;
    if (s.admissible.size() == 1) {
      ++unique;
      ASSERT_NEAR(s.depth, inst.true_depth, 1e-9);
      ASSERT_LT((s.translation - inst.true_root).norm(), 1e-8);
    }
  }
  EXPECT_GT(unique, 0);
}

TEST(Procrustes, IdentityAndInversion) {
  Rng rng(2);
  const MatX3 gt = random_points(rng, 20);
  const auto same = procrustes_align(gt, gt);
  EXPECT_LT((same.transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(same.transform.scale, 1.0, 1e-12);
  EXPECT_LT((same.aligned - gt).cwiseAbs().maxCoeff(), 1e-12);
  for (int t = 0; t < 100; ++t) {
    const MatX3 g = random_points(rng, 15);
    const SimilarityTransform s = random_similarity(rng);
    const auto r = procrustes_align(s.apply(g), g);
    ASSERT_LT((r.aligned - g).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_NEAR(r.transform.scale * s.scale, 1.0, 1e-10);
  }
}

TEST(Procrustes, ReflectionGuardKeepsRotationProper) {
  Rng rng(3);
  const MatX3 g = random_points(rng, 10);
  MatX3 mirrored = g;
  mirrored.col(0) *= -1.0;
  const auto r = procrustes_align(mirrored, g);
  EXPECT_NEAR(r.transform.rotation.determinant(), 1.0, 1e-12);
  EXPECT_TRUE(is_rotation(r.transform.rotation));
  // Planar sets have a rank-deficient cross-covariance.
  MatX3 planar = random_points(rng, 8);
  planar.col(2).setZero();
  EXPECT_TRUE(is_rotation(procrustes_align(planar, planar).transform.rotation));
  EXPECT_THROW(procrustes_align(MatX3::Ones(5, 3), g.topRows(5)), Error);
}

TEST(Procrustes, AlignedSquaredErrorNeverExceedsRootRelative) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const MatX3 g = random_points(rng, 12);
    const MatX3 p = g + 0.5 * random_points(rng, 12);
    const MatX3 pr = p.rowwise() - p.row(0), gr = g.rowwise() - g.row(0);
    ASSERT_LE((procrustes_align(p, g).aligned - g).squaredNorm(), (pr - gr).squaredNorm() + 1e-12);
  }
}

TEST(Procrustes, MeanErrorCanExceedRootRelative) {
  // Least squares does not minimize the mean of the norms, so a random
  // search turns up pairs where alignment makes MPJPE worse.
  Rng rng(110);
  int found = 0;
  for (int t = 0; t < 5000 && !found; ++t) {
    const MatX3 g = random_points(rng, 17);
    const MatX3 p = g + rng.uniform(0.01, 0.5) * random_points(rng, 17);
    if (mpjpe(p, g, MpjpeMode::Procrustes) > mpjpe(p, g, MpjpeMode::RootRelative)) ++found;
  }
  EXPECT_GT(found, 0);
}

TEST(Mpjpe, OffsetsAndSingleJointErrors) {
  Rng rng(5);
  const MatX3 g = random_points(rng, 17);
  const MatX3 shifted = g.rowwise() + Eigen::RowVector3d(0.3, -1.0, 2.0);
  EXPECT_NEAR(mpjpe(shifted, g, MpjpeMode::RootRelative), 0.0, 1e-9);
  MatX3 off = g;
  off.bottomRows(16).col(0).array() += 0.001;
  EXPECT_NEAR(mpjpe(off, g, MpjpeMode::RootRelative), 16.0 / 17.0, 1e-9);
  const VecX per = per_joint_errors(off, g, MpjpeMode::RootRelative);
  EXPECT_EQ(per[0], 0.0);
  EXPECT_NEAR(per[5], 1.0, 1e-9);
  EXPECT_NEAR(mpjpe(random_similarity(rng).apply(g), g, MpjpeMode::Procrustes), 0.0, 1e-7);
  EXPECT_THROW(mpjpe(g, g.topRows(3), MpjpeMode::RootRelative), Error);
}

TEST(Metrics, LandmarkAndPhotometric) {
  MatX2 a(1, 2), b(1, 2);
  a << 1, 1;
  b << 4, 5;
  EXPECT_DOUBLE_EQ(landmark_error(a, b), 5.0);
  Rng rng(6);
  MatX2 p(30, 2), q(30, 2);
  for (int i = 0; i < 30; ++i) p.row(i) = Vec2(rng.normal(), rng.normal()), q.row(i) = Vec2(rng.normal(), rng.normal());
  double want = 0.0;
  for (int i = 0; i < 30; ++i) want += std::hypot(p(i, 0) - q(i, 0), p(i, 1) - q(i, 1));
  EXPECT_NEAR(landmark_error(p, q), want / 30.0, 1e-14);

  EXPECT_EQ(photometric_error(MatX3::Zero(4, 3), MatX3::Ones(4, 3)), Vec3(1, 1, 1));
  MatX3 c1(3, 3), c2(3, 3);
  c1 << 0.1, 0.2, 0.3, 0.5, 0.5, 0.5, 1.0, 0.0, 0.25;
  c2 << 0.2, 0.2, 0.1, 0.5, 0.0, 0.5, 0.0, 0.0, 0.75;
  const Vec3 e = photometric_error(c1, c2);
  EXPECT_NEAR(e.x(), 1.1 / 3.0, 1e-15);
  EXPECT_NEAR(e.y(), 0.5 / 3.0, 1e-15);
  EXPECT_NEAR(e.z(), 0.7 / 3.0, 1e-15);
}
