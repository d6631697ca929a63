#include "kinebody/assets.hpp"
#include "kinebody/kba.hpp"
#include "kinebody/rng.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace kinebody;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "kinebody_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Numerical;  // sentinel: nothing thrown
}

bool same(const MatX3& a, const MatX3& b) { return a.rows() == b.rows() && (a.array() == b.array()).all(); }

}  // namespace

TEST(Rng, SplitStreamsAreIndependentOfConsumption) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) a.next_u64();
  Rng ca = a.split("child"), cb = b.split("child");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ca.next_u64(), cb.next_u64());
  EXPECT_NE(Rng(42).split("x").next_u64(), Rng(42).split("y").next_u64());
  EXPECT_NE(Rng(42).split(std::uint64_t{0}).next_u64(), Rng(42).split(std::uint64_t{1}).next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng r(3);
  double s = 0, s2 = 0, n = 0, n2 = 0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
    const double z = r.normal();
    n += z;
    n2 += z * z;
  }
  EXPECT_NEAR(s / count, 0.5, 0.005);
  EXPECT_NEAR(s2 / count - 0.25, 1.0 / 12.0, 0.003);
  EXPECT_NEAR(n / count, 0.0, 0.01);
  EXPECT_NEAR(n2 / count, 1.0, 0.01);
}

TEST(Kba, RoundTripIsBitExact) {
  KbaFile f("test");
  MatX3 m(3, 3);
  m << 1.0 / 3.0, -0.0, 1e-300, std::numeric_limits<double>::max(), 2, 3, 4, 5, 6;
  put_matrix(f, "m", m);
  put_indices(f, "ids", {0, kNoParent, 7});
  const auto bytes = encode_kba(f);
  const KbaFile g = decode_kba(bytes);
  EXPECT_EQ(g.kind(), "test");
  const MatX3 back = get_points(g, "m");
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 9), 0);
  EXPECT_EQ(get_indices(g, "ids"), (std::vector<int>{0, kNoParent, 7}));
  EXPECT_EQ(encode_kba(g), bytes);
}

TEST(Kba, CorruptInputsAreRejected) {
  KbaFile f("test");
  put_matrix(f, "m", MatX3(MatX3::Ones(2, 3)));
  auto bytes = encode_kba(f);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_kba(bad_magic); }), ErrorKind::SchemaMismatch);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 4);
  EXPECT_EQ(kind_of([&] { decode_kba(truncated); }), ErrorKind::SchemaMismatch);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(kind_of([&] { decode_kba(trailing); }), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of([&] { get_points(f, "missing"); }), ErrorKind::SchemaMismatch);
}

TEST(SyntheticRig, JointCountsAndDeterminism) {
  const auto a = generate_synthetic_rig(7, 520, 96);
  const auto b = generate_synthetic_rig(7, 520, 96);
  EXPECT_EQ(a.rig.num_joints(), kBodyJoints + kHandJoints);
  EXPECT_EQ(kBodyJoints, 22);
  EXPECT_EQ(kHandJoints, 30);
  EXPECT_EQ(a.rig.num_vertices(), 520);
  EXPECT_EQ(a.face.num_vertices(), 96);
  EXPECT_EQ(encode_kba(to_kba(a.rig)), encode_kba(to_kba(b.rig)));
  EXPECT_EQ(encode_kba(to_kba(a.face)), encode_kba(to_kba(b.face)));
  EXPECT_EQ(encode_kba(to_kba(a.merge)), encode_kba(to_kba(b.merge)));
  EXPECT_NE(encode_kba(to_kba(generate_synthetic_rig(8, 520, 96).rig)), encode_kba(to_kba(a.rig)));
}

TEST(SyntheticRig, EveryTypeInvariantHoldsForManySeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = generate_synthetic_rig(seed, 260, 40);
    ASSERT_NO_THROW(validate(a.rig)) << "seed " << seed;
    ASSERT_NO_THROW(validate(a.face)) << "seed " << seed;
    ASSERT_NO_THROW(validate(a.merge, a.rig, a.face)) << "seed " << seed;
    const VecX sums = a.rig.skinning_weights.rowwise().sum();
    ASSERT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(SyntheticRig, TooSmallSizesAreRejected) {
  EXPECT_EQ(kind_of([] { generate_synthetic_rig(1, 100, 96); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { generate_synthetic_rig(1, 520, 5); }), ErrorKind::InvalidArgument);
}

TEST(SyntheticRig, ShapeBasesAreOrthogonal) {
  const auto a = generate_synthetic_rig(2, 600, 60);
  for (int i = 0; i < kShapeDims; ++i)
    for (int j = 0; j < i; ++j)
      EXPECT_NEAR(a.rig.shape_basis[i].cwiseProduct(a.rig.shape_basis[j]).sum(), 0.0, 1e-12);
}

TEST(AssetIo, SaveLoadRoundTripIsLossless) {
  const auto a = generate_synthetic_rig(11, 520, 96);
  const auto rp = temp_path("rig.kba"), fp = temp_path("face.kba"), mp = temp_path("merge.kba");
  save_asset(rp, a.rig);
  save_asset(fp, a.face);
  save_asset(mp, a.merge);
  EXPECT_TRUE(std::filesystem::exists(rp + ".manifest"));

  const auto rig = std::get<BodyRig>(load_asset(rp));
  EXPECT_TRUE(same(rig.mean_vertices, a.rig.mean_vertices));
  EXPECT_TRUE((rig.skinning_weights.array() == a.rig.skinning_weights.array()).all());
  EXPECT_EQ(rig.parent_index, a.rig.parent_index);
  EXPECT_TRUE(same(rig.rest_joint_positions, a.rig.rest_joint_positions));
  for (int k = 0; k < kShapeDims; ++k) EXPECT_TRUE(same(rig.shape_basis[k], a.rig.shape_basis[k]));
  EXPECT_EQ(rig.basic_keypoint_ids, a.rig.basic_keypoint_ids);
  EXPECT_EQ(rig.extended_keypoint_ids, a.rig.extended_keypoint_ids);

  const auto face = std::get<FaceAsset>(load_asset(fp));
  EXPECT_TRUE(same(face.mean_face, a.face.mean_face));
  EXPECT_TRUE(same(face.mean_reflectance, a.face.mean_reflectance));
  EXPECT_TRUE(same(face.expression_basis[63], a.face.expression_basis[63]));
  EXPECT_EQ(face.triangles, a.face.triangles);
  EXPECT_EQ(face.boundary_loop, a.face.boundary_loop);
  EXPECT_EQ(face.landmark_ids, a.face.landmark_ids);

  const auto merge = std::get<MergeSpec>(load_asset(mp));
  EXPECT_EQ(merge.body_boundary_loop, a.merge.body_boundary_loop);
  EXPECT_EQ(merge.face_region, a.merge.face_region);
  EXPECT_EQ(merge.scale, a.merge.scale);
  EXPECT_TRUE((merge.rotation.array() == a.merge.rotation.array()).all());
  EXPECT_TRUE((merge.translation.array() == a.merge.translation.array()).all());
}

TEST(AssetIo, SkinningRowSummingTo08IsRejectedWithRowNumber) {
  auto a = generate_synthetic_rig(5, 520, 96);
  a.rig.skinning_weights.row(17) *= 0.8;
  const auto path = temp_path("bad_weights.kba");
  write_kba(path, to_kba(a.rig));
  try {
    load_asset(path);
    FAIL() << "expected an invariant violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvariantViolation);
    EXPECT_NE(std::string(e.what()).find("row 17"), std::string::npos) << e.what();
  }
}

TEST(AssetIo, ParentCycleIsRejected) {
  auto a = generate_synthetic_rig(5, 520, 96);
  a.rig.parent_index[3] = 9;  // spine1 -> spine3 -> spine2 -> spine1
  const auto path = temp_path("cycle.kba");
  write_kba(path, to_kba(a.rig));
  EXPECT_EQ(kind_of([&] { load_asset(path); }), ErrorKind::InvalidHierarchy);
}

TEST(AssetIo, HierarchyChecks) {
  EXPECT_EQ(kind_of([] { validate_hierarchy({kNoParent, kNoParent}); }), ErrorKind::InvalidHierarchy);
  EXPECT_EQ(kind_of([] { validate_hierarchy({kNoParent, 5}); }), ErrorKind::InvalidHierarchy);
  EXPECT_EQ(kind_of([] { validate_hierarchy({kNoParent, 2, 1}); }), ErrorKind::InvalidHierarchy);
  EXPECT_NO_THROW(validate_hierarchy({kNoParent, 0, 1, 1}));
}

TEST(AssetIo, WrongKindIsASchemaMismatch) {
  const auto a = generate_synthetic_rig(5, 520, 96);
  const auto path = temp_path("face_as_rig.kba");
  save_asset(path, a.face);
  EXPECT_EQ(kind_of([&] { load_body_rig(path); }), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of([&] { load_asset(temp_path("does_not_exist.kba")); }), ErrorKind::Io);
}

TEST(AssetIo, KeypointIdsMustBeDisjoint) {
  auto a = generate_synthetic_rig(5, 520, 96);
  a.rig.extended_keypoint_ids.push_back(a.rig.basic_keypoint_ids.front());
  EXPECT_EQ(kind_of([&] { validate(a.rig); }), ErrorKind::InvariantViolation);
}
