#pragma once

// Keypoint heat-map machinery: ground-truth map construction, argmax
// decoding, map losses, sliding-window part localization, bilinear feature
// crops and hand-branch input assembly.
//
// Tensors are channel-major, row-major (c, y, x). Pixel (x, y) has its center
// at coordinate (x, y); u is the column (x) and v the row (y).

#include "kinebody/kba.hpp"
#include "kinebody/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace kinebody {

struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
    require(c >= 0 && h >= 0 && w >= 0, ErrorKind::InvalidArgument, "tensor dims must be nonnegative");
  }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  double& at(int c, int y, int x) { return data[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data[index(c, y, x)]; }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  std::string shape_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

inline void require_same_shape(const Tensor3& a, const Tensor3& b, const std::string& what) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::DimensionMismatch, what + ": " + a.shape_string() + " vs " + b.shape_string());
}

inline double squared_frobenius(const Tensor3& a, const Tensor3& b) {
  require_same_shape(a, b, "squared_frobenius");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s;
}

/// K (J x H x W), D and L (3J x H x W); channel 3i + k of D/L is coordinate k of joint i.
struct MapStack {
  Tensor3 K;
  Tensor3 D;
  Tensor3 L;

  int joints() const { return K.channels; }
};

inline void validate(const MapStack& m) {
  require(m.D.channels == 3 * m.K.channels && m.L.channels == 3 * m.K.channels, ErrorKind::DimensionMismatch,
          "D and L need 3 channels per keypoint channel");
  require(m.D.height == m.K.height && m.D.width == m.K.width && m.L.height == m.K.height && m.L.width == m.K.width,
          ErrorKind::DimensionMismatch, "map spatial sizes differ");
}

inline constexpr double kDefaultSigma = 2.0;

/// Gaussian keypoint maps (peak 1) and spatially constant D/L tiles.
/// Keypoints outside [0, W-1] x [0, H-1] leave their K channel zero.
inline MapStack build_gt_maps(const MatX2& keypoints_2d, const MatX3& keypoints_3d, const MatX3& bone_dirs, int height,
                              int width, double sigma = kDefaultSigma) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::InvalidArgument, "sigma must be positive");
  require(height > 0 && width > 0, ErrorKind::InvalidArgument, "map size must be positive");
  const auto nj = static_cast<int>(keypoints_2d.rows());
  require(keypoints_3d.rows() == nj && bone_dirs.rows() == nj, ErrorKind::DimensionMismatch,
          "2D, 3D and bone-direction keypoint counts differ");
  MapStack m{Tensor3(nj, height, width), Tensor3(3 * nj, height, width), Tensor3(3 * nj, height, width)};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int j = 0; j < nj; ++j) {
    const double u = keypoints_2d(j, 0), v = keypoints_2d(j, 1);
    const bool inside = u >= 0.0 && u <= width - 1.0 && v >= 0.0 && v <= height - 1.0;
    if (inside) {
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double dx = x - u, dy = y - v;
          m.K.at(j, y, x) = std::exp(-(dx * dx + dy * dy) * inv);
        }
    }
    for (int k = 0; k < 3; ++k) {
      std::fill_n(m.D.data.begin() + static_cast<std::ptrdiff_t>(m.D.index(3 * j + k, 0, 0)), m.D.plane(), bone_dirs(j, k));
      std::fill_n(m.L.data.begin() + static_cast<std::ptrdiff_t>(m.L.index(3 * j + k, 0, 0)), m.L.plane(),
                  keypoints_3d(j, k));
    }
  }
  return m;
}

struct DecodedKeypoints {
  MatX2 pixels;               // (u, v) = (column, row)
  MatX3 coords;               // read from L at the argmax pixel
  VecX confidence;            // max of K_i
  std::vector<bool> detected; // false when K_i has no positive value
};

/// Per-joint argmax of K (first hit in row-major order wins) and the 3D
/// coordinate stored in L at that pixel.
inline DecodedKeypoints decode_keypoints(const MapStack& maps) {
  validate(maps);
  const int nj = maps.joints();
  DecodedKeypoints out{MatX2::Zero(nj, 2), MatX3::Zero(nj, 3), VecX::Zero(nj), std::vector<bool>(nj, false)};
  for (int j = 0; j < nj; ++j) {
    int best_x = 0, best_y = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < maps.K.height; ++y)
      for (int x = 0; x < maps.K.width; ++x) {
        const double val = maps.K.at(j, y, x);
        if (val > best) {
          best = val;
          best_x = x;
          best_y = y;
        }
      }
    if (maps.K.plane() == 0) best = 0.0;
    out.pixels.row(j) = Vec2(best_x, best_y);
    out.confidence[j] = best;
    out.detected[j] = best > 0.0;
    if (maps.K.plane() > 0)
      for (int k = 0; k < 3; ++k) out.coords(j, k) = maps.L.at(3 * j + k, best_y, best_x);
  }
  return out;
}

struct PoseNetLossWeights {
  double w_k = 1.0;
  double w_d = 1.0;
  double w_l = 1.0;

  /// Weights for samples without 3D labels.
  static PoseNetLossWeights only_2d(double w_k = 1.0) { return {w_k, 0.0, 0.0}; }
};

struct PoseNetLoss {
  double kmap = 0.0;
  double dmap = 0.0;
  double lmap = 0.0;
  double total = 0.0;
};

namespace detail {

/// ||K_gt (.) (A_gt - A)||_F^2 with K_gt channel i broadcast over channels 3i..3i+2.
inline double masked_vector_map_error(const Tensor3& k_gt, const Tensor3& gt, const Tensor3& pred) {
  double s = 0.0;
  const std::size_t plane = k_gt.plane();
  for (int j = 0; j < k_gt.channels; ++j)
    for (int k = 0; k < 3; ++k) {
      const double* g = gt.data.data() + gt.index(3 * j + k, 0, 0);
      const double* p = pred.data.data() + pred.index(3 * j + k, 0, 0);
      const double* m = k_gt.data.data() + k_gt.index(j, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = m[i] * (g[i] - p[i]);
        s += d * d;
      }
    }
  return s;
}

}  // namespace detail

/// L_p = w_k ||K_gt - K||^2 + w_d ||K_gt (.) (D_gt - D)||^2 + w_l ||K_gt (.) (L_gt - L)||^2.
inline PoseNetLoss posenet_loss(const MapStack& pred, const MapStack& gt, const PoseNetLossWeights& w) {
  validate(pred);
  validate(gt);
  require_same_shape(pred.K, gt.K, "posenet_loss K");
  require_same_shape(pred.D, gt.D, "posenet_loss D");
  require_same_shape(pred.L, gt.L, "posenet_loss L");
  require(w.w_k >= 0.0 && w.w_d >= 0.0 && w.w_l >= 0.0, ErrorKind::InvalidArgument, "loss weights must be >= 0");
  PoseNetLoss out;
  out.kmap = squared_frobenius(gt.K, pred.K);
  out.dmap = detail::masked_vector_map_error(gt.K, gt.D, pred.D);
  out.lmap = detail::masked_vector_map_error(gt.K, gt.L, pred.L);
  out.total = w.w_k * out.kmap + w.w_d * out.dmap + w.w_l * out.lmap;
  return out;
}

/// One-channel part heat-map: per-pixel max over keypoint channels.
inline Tensor3 heatmap_from_kmaps(const Tensor3& k) {
  Tensor3 h(1, k.height, k.width, k.channels ? -std::numeric_limits<double>::infinity() : 0.0);
  for (int c = 0; c < k.channels; ++c)
    for (std::size_t i = 0; i < k.plane(); ++i) h.data[i] = std::max(h.data[i], k.data[c * k.plane() + i]);
  return h;
}

struct DetLossWeights {
  double lambda_b = 1.0;
  double lambda_h = 1.0;
  double lambda_f = 1.0;
};

struct PartMaps {
  MapStack pred;
  MapStack gt;
  PoseNetLossWeights weights;
};

struct DetNetLossInput {
  PartMaps body;
  PartMaps left_hand;
  PartMaps right_hand;
  Tensor3 left_heatmap_pred, left_heatmap_gt;
  Tensor3 right_heatmap_pred, right_heatmap_gt;
  Tensor3 face_heatmap_pred, face_heatmap_gt;
  DetLossWeights lambdas;
};

struct DetNetLoss {
  PoseNetLoss body, left_hand, right_hand;
  double hand_heatmap = 0.0;  // ||H_l^gt - H_l||^2 + ||H_r^gt - H_r||^2
  double face_heatmap = 0.0;  // ||H_f^gt - H_f||^2
  double total = 0.0;
};

/// lambda_b L_p^b + lambda_h (L_p^lh + L_p^rh + L_h) + lambda_f L_f.
/// A part whose lambda is zero is skipped entirely, so its maps may be empty.
inline DetNetLoss full_detnet_loss(const DetNetLossInput& in) {
  const auto& lam = in.lambdas;
  require(lam.lambda_b >= 0.0 && lam.lambda_h >= 0.0 && lam.lambda_f >= 0.0, ErrorKind::InvalidArgument,
          "part weights must be >= 0");
  DetNetLoss out;
  if (lam.lambda_b > 0.0) out.body = posenet_loss(in.body.pred, in.body.gt, in.body.weights);
  if (lam.lambda_h > 0.0) {
    out.left_hand = posenet_loss(in.left_hand.pred, in.left_hand.gt, in.left_hand.weights);
    out.right_hand = posenet_loss(in.right_hand.pred, in.right_hand.gt, in.right_hand.weights);
    out.hand_heatmap = squared_frobenius(in.left_heatmap_gt, in.left_heatmap_pred) +
                       squared_frobenius(in.right_heatmap_gt, in.right_heatmap_pred);
  }
  if (lam.lambda_f > 0.0) out.face_heatmap = squared_frobenius(in.face_heatmap_gt, in.face_heatmap_pred);
  out.total = lam.lambda_b * out.body.total +
              lam.lambda_h * (out.left_hand.total + out.right_hand.total + out.hand_heatmap) +
              lam.lambda_f * out.face_heatmap;
  return out;
}

struct LocalizeConfig {
  double threshold = 0.95;
  int step = 1;
};

/// Square window: side w, top-left column u and row v.
struct Window {
  int w = 0;
  int u = 0;
  int v = 0;
  double mass = 0.0;

  bool operator==(const Window& o) const { return w == o.w && u == o.u && v == o.v; }
};

/// Smallest square window holding at least t of the total heat-map mass.
///
/// Sides are tried in increasing order (1, 1+step, ..., capped at the larger
/// map side, which is always tried). For the first feasible side, the
/// position with the most mass wins, ties going to the first in row-major
/// (v, then u) order. Windows larger than a map side are clipped to it.
inline Window localize_window(const Tensor3& heatmap, const LocalizeConfig& cfg) {
  require(heatmap.channels == 1, ErrorKind::DimensionMismatch, "localize_window expects a 1-channel map");
  require(cfg.threshold > 0.0 && cfg.threshold <= 1.0, ErrorKind::InvalidArgument, "threshold must be in (0, 1]");
  require(cfg.step >= 1, ErrorKind::InvalidArgument, "step must be >= 1");
  const int h = heatmap.height, w = heatmap.width;
  // Integral image; S(y, x) = sum over rows < y, cols < x.
  std::vector<double> s(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  auto S = [&](int y, int x) -> double& { return s[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      const double val = heatmap.at(0, y, x);
      require(val >= 0.0 && std::isfinite(val), ErrorKind::InvalidArgument, "heat-map values must be finite and >= 0");
      row += val;
      S(y + 1, x + 1) = S(y, x + 1) + row;
    }
  }
  const double total = S(h, w);
  if (!(total > 0.0)) throw Error(ErrorKind::NoDetection, "heat-map has zero total mass");
  const double target = cfg.threshold * total;
  const int max_side = std::max(h, w);
  for (int side = 1;; side = std::min(side + cfg.step, max_side)) {
    const int span_y = std::min(side, h), span_x = std::min(side, w);
    Window best{side, 0, 0, -1.0};
    for (int v = 0; v + span_y <= h; ++v)
      for (int u = 0; u + span_x <= w; ++u) {
        const double mass = S(v + span_y, u + span_x) - S(v, u + span_x) - S(v + span_y, u) + S(v, u);
        if (mass > best.mass) best = {side, u, v, mass};
      }
    if (best.mass >= target) return best;
    if (side == max_side) break;
  }
  // Unreachable for valid inputs: the clipped full-map window holds all mass.
  throw Error(ErrorKind::Numerical, "no window reached the mass threshold");
}

/// Bilinear resize of the window [u, u+w) x [v, v+w) to out_h x out_w with
/// half-pixel centers; samples outside the map clamp to the edge.
inline Tensor3 crop_resize_bilinear(const Tensor3& features, const Window& win, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, ErrorKind::InvalidArgument, "output size must be positive");
  require(win.w > 0, ErrorKind::InvalidArgument, "window side must be positive");
  const bool intersects = win.u < features.width && win.u + win.w > 0 && win.v < features.height && win.v + win.w > 0;
  if (!intersects || features.width == 0 || features.height == 0)
    throw Error(ErrorKind::InvalidArgument, "crop window does not intersect the feature map");
  Tensor3 out(features.channels, out_h, out_w);
  const double sx = static_cast<double>(win.w) / out_w;
  const double sy = static_cast<double>(win.w) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp(win.v + (oy + 0.5) * sy - 0.5, 0.0, features.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, features.height - 1);
    const double ty = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp(win.u + (ox + 0.5) * sx - 0.5, 0.0, features.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, features.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < features.channels; ++c) {
        const double top = (1.0 - tx) * features.at(c, y0, x0) + tx * features.at(c, y0, x1);
        const double bot = (1.0 - tx) * features.at(c, y1, x0) + tx * features.at(c, y1, x1);
        out.at(c, oy, ox) = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

/// [body_crop; supp; attention] along channels. The attention channel is 1
/// when body features are valid (always at inference) and 0 otherwise.
inline Tensor3 assemble_hand_input(const Tensor3& body_crop, const Tensor3& supp, bool attention) {
  require(body_crop.height == supp.height && body_crop.width == supp.width, ErrorKind::DimensionMismatch,
          "body crop and supp features differ spatially");
  Tensor3 out(body_crop.channels + supp.channels + 1, supp.height, supp.width);
  auto it = std::copy(body_crop.data.begin(), body_crop.data.end(), out.data.begin());
  it = std::copy(supp.data.begin(), supp.data.end(), it);
  std::fill(it, out.data.end(), attention ? 1.0 : 0.0);
  return out;
}

/// Channel slice [first, first + count).
inline Tensor3 slice_channels(const Tensor3& t, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= t.channels, ErrorKind::InvalidArgument, "channel slice out of range");
  Tensor3 out(count, t.height, t.width);
  std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(t.index(first, 0, 0)), out.data.size(), out.data.begin());
  return out;
}

// KBA1 storage for map stacks (kind "map_stack", arrays K, D, L).

inline void put_tensor(KbaFile& f, std::string name, const Tensor3& t) {
  f.add_f64(std::move(name),
            {static_cast<std::uint64_t>(t.channels), static_cast<std::uint64_t>(t.height), static_cast<std::uint64_t>(t.width)},
            t.data);
}

inline Tensor3 get_tensor(const KbaFile& f, std::string_view name) {
  const auto& a = f.get(name, DType::F64, 3);
  Tensor3 t(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), static_cast<int>(a.dims[2]));
  t.data = a.f64;
  return t;
}

inline KbaFile to_kba(const MapStack& m) {
  KbaFile f("map_stack");
  put_tensor(f, "K", m.K);
  put_tensor(f, "D", m.D);
  put_tensor(f, "L", m.L);
  return f;
}

inline MapStack map_stack_from_kba(const KbaFile& f) {
  require(f.kind() == "map_stack", ErrorKind::SchemaMismatch, "expected kind map_stack, got " + f.kind());
  MapStack m{get_tensor(f, "K"), get_tensor(f, "D"), get_tensor(f, "L")};
  validate(m);
  return m;
}

}  // namespace kinebody
