#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kinebody;

namespace {

struct Keypoints {
  MatX2 px;
  MatX3 xyz;
  MatX3 dirs;
};

Keypoints random_keypoints(Rng& rng, int n, int h, int w) {
  Keypoints k{MatX2(n, 2), MatX3(n, 3), MatX3(n, 3)};
  for (int j = 0; j < n; ++j) {
    k.px.row(j) = Vec2(static_cast<double>(rng.below(static_cast<std::uint64_t>(w))),
                       static_cast<double>(rng.below(static_cast<std::uint64_t>(h))));
    k.xyz.row(j) = Vec3(rng.normal(), rng.normal(), rng.normal());
    k.dirs.row(j) = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  }
  return k;
}

Tensor3 random_tensor(Rng& rng, int c, int h, int w) {
  Tensor3 t(c, h, w);
  for (double& v : t.data) v = rng.normal();
  return t;
}

MapStack random_stack(Rng& rng, int j, int h, int w) {
  MapStack m{random_tensor(rng, j, h, w), random_tensor(rng, 3 * j, h, w), random_tensor(rng, 3 * j, h, w)};
  for (double& v : m.K.data) v = std::abs(v);
  return m;
}

}  // namespace

TEST(Maps, GaussianPeakAndTiles) {
  MatX2 px(1, 2);
  px << 3, 5;
  const MatX3 xyz = Vec3(0.1, -0.2, 0.3).transpose(), dir = Vec3(0, 0, 1).transpose();
  const auto m = build_gt_maps(px, xyz, dir, 8, 10, 2.0);
  EXPECT_EQ(m.K.at(0, 5, 3), 1.0);
  EXPECT_NEAR(m.K.at(0, 5, 5), std::exp(-4.0 / 8.0), 1e-15);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      EXPECT_EQ(m.L.at(1, y, x), -0.2);
      EXPECT_EQ(m.D.at(2, y, x), 1.0);
    }
}

TEST(Maps, OutOfBoundsKeypointLeavesChannelEmpty) {
  MatX2 px(2, 2);
  px << -1, 2, 4, 4;
  const auto m = build_gt_maps(px, MatX3::Zero(2, 3), MatX3::Zero(2, 3), 8, 8);
  const auto d = decode_keypoints(m);
  EXPECT_FALSE(d.detected[0]);
  EXPECT_TRUE(d.detected[1]);
  EXPECT_EQ(d.confidence[0], 0.0);
}

TEST(Maps, DecodeRoundTripIsExact) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = random_keypoints(rng, 21, 32, 40);
    const auto d = decode_keypoints(build_gt_maps(k.px, k.xyz, k.dirs, 32, 40));
    ASSERT_TRUE((d.pixels.array() == k.px.array()).all());
    ASSERT_TRUE((d.coords.array() == k.xyz.array()).all());
  }
}

TEST(Maps, ArgmaxTieGoesToFirstInRowMajorOrder) {
  MapStack m{Tensor3(1, 4, 4), Tensor3(3, 4, 4), Tensor3(3, 4, 4)};
  m.K.at(0, 2, 1) = 0.7;
  m.K.at(0, 1, 3) = 0.7;
  m.L.at(0, 1, 3) = 9.0;
  const auto d = decode_keypoints(m);
  EXPECT_EQ(d.pixels(0, 0), 3);
  EXPECT_EQ(d.pixels(0, 1), 1);
  EXPECT_EQ(d.coords(0, 0), 9.0);
}

TEST(Maps, DecodeMatchesBruteArgmax) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_stack(rng, 5, 9, 7);
    const auto d = decode_keypoints(m);
    for (int j = 0; j < 5; ++j) {
      double best = -1.0;
      int bx = -1, by = -1;
      for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 7; ++x)
          if (m.K.at(j, y, x) > best) best = m.K.at(j, y, x), bx = x, by = y;
      ASSERT_EQ(d.pixels(j, 0), bx);
      ASSERT_EQ(d.pixels(j, 1), by);
      ASSERT_EQ(d.coords(j, 2), m.L.at(3 * j + 2, by, bx));
    }
  }
}

TEST(Maps, PoseNetLossMatchesPixelSums) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pred = random_stack(rng, 4, 6, 5), gt = random_stack(rng, 4, 6, 5);
    const auto want = oracle::posenet_terms(pred, gt);
    const auto got = posenet_loss(pred, gt, {0.5, 2.0, 3.0});
    EXPECT_NEAR(got.kmap, want.k, 1e-12 * std::max(1.0, want.k));
    EXPECT_NEAR(got.dmap, want.d, 1e-12 * std::max(1.0, want.d));
    EXPECT_NEAR(got.lmap, want.l, 1e-12 * std::max(1.0, want.l));
    EXPECT_NEAR(got.total, 0.5 * want.k + 2.0 * want.d + 3.0 * want.l, 1e-11 * std::max(1.0, got.total));
  }
}

TEST(Maps, ErrorsWhereGroundTruthKIsZeroAreMasked) {
  Rng rng(4);
  auto gt = random_stack(rng, 3, 5, 5);
  for (int y = 0; y < 5; ++y) gt.K.at(1, y, 2) = 0.0;
  auto pred = gt;
  for (int c = 3; c < 6; ++c)
    for (int y = 0; y < 5; ++y) {
      pred.D.at(c, y, 2) += 100.0;
      pred.L.at(c, y, 2) -= 50.0;
    }
  const auto l = posenet_loss(pred, gt, {});
  EXPECT_EQ(l.total, 0.0);
  EXPECT_EQ(posenet_loss(pred, gt, PoseNetLossWeights::only_2d()).total, 0.0);
}

TEST(Maps, DetNetLossCombinesParts) {
  Rng rng(5);
  DetNetLossInput in;
  in.body = {random_stack(rng, 3, 4, 4), random_stack(rng, 3, 4, 4), {}};
  in.left_hand = {random_stack(rng, 2, 4, 4), random_stack(rng, 2, 4, 4), {}};
  in.right_hand = {random_stack(rng, 2, 4, 4), random_stack(rng, 2, 4, 4), PoseNetLossWeights::only_2d()};
  in.left_heatmap_pred = random_tensor(rng, 1, 4, 4);
  in.left_heatmap_gt = random_tensor(rng, 1, 4, 4);
  in.right_heatmap_pred = random_tensor(rng, 1, 4, 4);
  in.right_heatmap_gt = random_tensor(rng, 1, 4, 4);
  in.face_heatmap_pred = random_tensor(rng, 1, 4, 4);
  in.face_heatmap_gt = random_tensor(rng, 1, 4, 4);
  in.lambdas = {0.5, 2.0, 3.0};
  const auto l = full_detnet_loss(in);
  const auto b = oracle::posenet_terms(in.body.pred, in.body.gt);
  const auto lh = oracle::posenet_terms(in.left_hand.pred, in.left_hand.gt);
  const auto rh = oracle::posenet_terms(in.right_hand.pred, in.right_hand.gt);
  double hh = 0.0, hf = 0.0;
  for (int i = 0; i < 16; ++i) {
    hh += std::pow(in.left_heatmap_gt.data[i] - in.left_heatmap_pred.data[i], 2) +
          std::pow(in.right_heatmap_gt.data[i] - in.right_heatmap_pred.data[i], 2);
    hf += std::pow(in.face_heatmap_gt.data[i] - in.face_heatmap_pred.data[i], 2);
  }
  const double want = 0.5 * (b.k + b.d + b.l) + 2.0 * (lh.k + lh.d + lh.l + rh.k + hh) + 3.0 * hf;
  EXPECT_NEAR(l.total, want, 1e-12 * want);

  // A disabled part may leave its maps empty.
  DetNetLossInput body_only;
  body_only.body = in.body;
  body_only.lambdas = {1.0, 0.0, 0.0};
  EXPECT_NEAR(full_detnet_loss(body_only).total, b.k + b.d + b.l, 1e-12 * (b.k + b.d + b.l));
}

TEST(Localize, MatchesExhaustiveSearch) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor3 h(1, 12, 12);
    for (double& v : h.data) v = rng.uniform() < 0.6 ? 0.0 : rng.uniform();
    h.data[rng.below(h.data.size())] += 1.0;
    for (double t : {0.8, 0.9, 0.95, 1.0})
      for (int step : {1, 3}) {
        const Window got = localize_window(h, {t, step});
        const Window want = oracle::localize_brute(h, t, step);
        ASSERT_EQ(got, want) << "trial " << trial << " t " << t << " step " << step;
      }
  }
}

TEST(Localize, SinglePeakAndThresholdOne) {
  Tensor3 h(1, 6, 8);
  h.at(0, 4, 2) = 3.0;
  const Window w = localize_window(h, {0.95, 1});
  EXPECT_EQ(w, (Window{1, 2, 4, 3.0}));
  h.at(0, 0, 7) = 1.0;
  const Window all = localize_window(h, {1.0, 1});
  EXPECT_EQ(all.w, 6);
  EXPECT_EQ(all.mass, 4.0);
}

TEST(Localize, RejectsEmptyOrNegativeMaps) {
  Tensor3 h(1, 4, 4);
  try {
    localize_window(h, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoDetection);
  }
  h.at(0, 0, 0) = -1.0;
  EXPECT_THROW(localize_window(h, {}), Error);
  EXPECT_THROW(localize_window(Tensor3(1, 4, 4, 1.0), {0.0, 1}), Error);
}

TEST(Crop, TwoByTwoToOnePixelAverages) {
  Tensor3 f(1, 2, 2);
  f.data = {1.0, 2.0, 1.0, 2.0};
  const Tensor3 out = crop_resize_bilinear(f, {2, 0, 0, 0.0}, 1, 1);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0), 1.5);
}

TEST(Crop, IdentityWindowAndLinearRamp) {
  Tensor3 f(2, 6, 6);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) f.at(c, y, x) = c * 100 + 2.0 * x + 3.0 * y;
  const Tensor3 same = crop_resize_bilinear(f, {6, 0, 0, 0.0}, 6, 6);
  EXPECT_EQ(same.data, f.data);
  // Interior samples of an affine ramp are exact.
  const Tensor3 up = crop_resize_bilinear(f, {2, 2, 2, 0.0}, 4, 4);
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 4; ++ox) {
      const double fx = 2 + (ox + 0.5) * 0.5 - 0.5, fy = 2 + (oy + 0.5) * 0.5 - 0.5;
      EXPECT_NEAR(up.at(1, oy, ox), 100 + 2.0 * fx + 3.0 * fy, 1e-12);
    }
  EXPECT_THROW(crop_resize_bilinear(f, {2, 10, 10, 0.0}, 4, 4), Error);
}

TEST(HandInput, ChannelLayoutAndSlicing) {
  Rng rng(7);
  const Tensor3 body = random_tensor(rng, 3, 4, 4), supp = random_tensor(rng, 2, 4, 4);
  const Tensor3 in = assemble_hand_input(body, supp, true);
  EXPECT_EQ(in.channels, 6);
  EXPECT_EQ(slice_channels(in, 0, 3).data, body.data);
  EXPECT_EQ(slice_channels(in, 3, 2).data, supp.data);
  EXPECT_EQ(slice_channels(in, 5, 1).data, std::vector<double>(16, 1.0));
  EXPECT_EQ(slice_channels(assemble_hand_input(body, supp, false), 5, 1).data, std::vector<double>(16, 0.0));
  EXPECT_THROW(assemble_hand_input(random_tensor(rng, 1, 3, 4), supp, true), Error);
}

TEST(Maps, KbaRoundTrip) {
  Rng rng(8);
  const auto m = random_stack(rng, 3, 5, 6);
  const auto back = map_stack_from_kba(decode_kba(encode_kba(to_kba(m))));
  EXPECT_EQ(back.K.data, m.K.data);
  EXPECT_EQ(back.D.data, m.D.data);
  EXPECT_EQ(back.L.data, m.L.data);
  KbaFile wrong("body_rig");
  EXPECT_THROW(map_stack_from_kba(wrong), Error);
}
