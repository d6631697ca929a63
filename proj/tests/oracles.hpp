#pragma once

// Independent reference implementations used only by tests. They share no
// code paths with the library routines they check.

#include "kinebody/kinebody.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using kinebody::MatX3;
using kinebody::Mat3;
using kinebody::Vec3;
using Mat4 = Eigen::Matrix4d;

inline Mat4 homogeneous(const Mat3& r, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Global joint transforms by multiplying 4x4 local transforms along the
/// explicit root-to-joint path.
inline std::vector<Mat4> fk_chain(const std::vector<int>& parent, const MatX3& rest, const std::vector<Mat3>& rot,
                                  const Vec3& root_translation) {
  const int n = static_cast<int>(parent.size());
  std::vector<Mat4> out(n);
  for (int j = 0; j < n; ++j) {
    std::vector<int> path;
    for (int k = j; k != -1; k = parent[k]) path.insert(path.begin(), k);
    Mat4 g = Mat4::Identity();
    for (int k : path) {
      const int p = parent[k];
      const Vec3 offset = p == -1 ? Vec3(rest.row(k).transpose() + root_translation)
                                  : Vec3((rest.row(k) - rest.row(p)).transpose());
      g = g * homogeneous(rot[k], offset);
    }
    out[j] = g;
  }
  return out;
}

/// v_i' = sum_j w_ij (G_j G_rest_j^-1) v_i, summed vertex by vertex.
inline MatX3 lbs(const MatX3& shaped, const kinebody::MatX& weights, const std::vector<Mat4>& global,
                 const MatX3& rest_joints) {
  MatX3 out(shaped.rows(), 3);
  for (Eigen::Index i = 0; i < shaped.rows(); ++i) {
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    const Eigen::Vector4d v(shaped(i, 0), shaped(i, 1), shaped(i, 2), 1.0);
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      if (weights(i, j) == 0.0) continue;
      const Mat4 rest_inv = homogeneous(Mat3::Identity(), -rest_joints.row(j).transpose());
      acc += weights(i, j) * (global[static_cast<std::size_t>(j)] * rest_inv * v);
    }
    out.row(i) = acc.head<3>().transpose();
  }
  return out;
}

/// Real SH from associated Legendre functions (std::assoc_legendre carries
/// no Condon-Shortley phase), ordered m = -l..l per band.
inline double real_sh(int l, int m, const Vec3& n) {
  const double theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
  const double phi = std::atan2(n.y(), n.x());
  const int am = std::abs(m);
  double f1 = 1.0, f2 = 1.0;
  for (int k = 2; k <= l - am; ++k) f1 *= k;
  for (int k = 2; k <= l + am; ++k) f2 *= k;
  const double k_lm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * f1 / f2);
  const double p = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), std::cos(theta));
  if (m == 0) return k_lm * p;
  const double s = std::sqrt(2.0) * k_lm * p;
  return m > 0 ? s * std::cos(am * phi) : s * std::sin(am * phi);
}

inline Eigen::Matrix<double, 9, 1> sh_basis(const Vec3& n) {
  Eigen::Matrix<double, 9, 1> h;
  int k = 0;
  for (int l = 0; l <= 2; ++l)
    for (int m = -l; m <= l; ++m) h[k++] = real_sh(l, m, n);
  return h;
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// Smallest window by direct summation over every candidate placement.
inline kinebody::Window localize_brute(const kinebody::Tensor3& h, double t, int step) {
  double total = 0.0;
  for (double v : h.data) total += v;
  const int max_side = std::max(h.height, h.width);
  std::vector<int> sides;
  for (int s = 1; s < max_side; s += step) sides.push_back(s);
  sides.push_back(max_side);
  for (int side : sides) {
    const int sy = std::min(side, h.height), sx = std::min(side, h.width);
    kinebody::Window best{side, 0, 0, -1.0};
    for (int v = 0; v + sy <= h.height; ++v)
      for (int u = 0; u + sx <= h.width; ++u) {
        double m = 0.0;
        for (int y = v; y < v + sy; ++y)
          for (int x = u; x < u + sx; ++x) m += h.at(0, y, x);
        if (m > best.mass) best = {side, u, v, m};
      }
    // Direct sums and integral-image sums may differ in the last bits.
    if (best.mass >= t * total * (1.0 - 1e-12)) return best;
  }
  return {};
}

/// PoseNet loss terms summed pixel by pixel.
struct PoseNetTerms {
  double k = 0.0, d = 0.0, l = 0.0;
};

inline PoseNetTerms posenet_terms(const kinebody::MapStack& pred, const kinebody::MapStack& gt) {
  PoseNetTerms t;
  const auto& K = gt.K;
  for (int j = 0; j < K.channels; ++j)
    for (int y = 0; y < K.height; ++y)
      for (int x = 0; x < K.width; ++x) {
        const double e = gt.K.at(j, y, x) - pred.K.at(j, y, x);
        t.k += e * e;
        for (int c = 0; c < 3; ++c) {
          const double kg = gt.K.at(j, y, x);
          const double ed = kg * (gt.D.at(3 * j + c, y, x) - pred.D.at(3 * j + c, y, x));
          const double el = kg * (gt.L.at(3 * j + c, y, x) - pred.L.at(3 * j + c, y, x));
          t.d += ed * ed;
          t.l += el * el;
        }
      }
  return t;
}

/// Bone/camera instance synthesized forward: a parent and child placed in
/// front of a random camera, projected, and described root-relatively.
struct TranslationInstance {
  kinebody::TranslationProblem problem;
  double true_depth = 0.0;
  Vec3 true_root = Vec3::Zero();
};

inline TranslationInstance synth_translation(kinebody::Rng& rng) {
  TranslationInstance inst;
  const double f = rng.uniform(300.0, 1500.0);
  auto cam = kinebody::Camera::from_params(f, f * rng.uniform(0.9, 1.1), rng.uniform(200, 400), rng.uniform(200, 400),
                                           rng.uniform(-2.0, 2.0));
  const Vec3 root(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2.0, 8.0));
  const Vec3 parent_rel(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3));
  const Vec3 bone = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() * rng.uniform(0.05, 0.6);
  const Vec3 parent = root + parent_rel, child = parent + bone;
  auto& p = inst.problem;
  p.camera = cam;
  p.parent_2d = cam.project(parent);
  p.child_2d = cam.project(child);
  p.parent_depth = parent_rel.z();
  p.child_depth = (child - root).z();
  p.bone_length = bone.norm();
  p.parent_relative = parent_rel;
  inst.true_depth = parent.z();
  inst.true_root = root;
  return inst;
}

/// Worst per-tensor relative error ||fd - analytic|| / ||fd|| of the batch
/// loss gradient, by central differences over every weight and bias.
inline double iknet_gradient_check(const kinebody::IKNetParams& params,
                                   const std::vector<const kinebody::IkSample*>& batch,
                                   const kinebody::IkKinematics& kin, const kinebody::IKTrainConfig& cfg,
                                   double h = 1e-6) {
  const auto g = kinebody::ik_batch_gradients(params, batch, kin, cfg);
  auto fd_entry = [&](auto&& poke) {
    kinebody::IKNetParams q = params;
    double& x = poke(q);
    const double x0 = x;
    x = x0 + h;
    const double lp = kinebody::ik_batch_loss(q, batch, kin, cfg);
    x = x0 - h;
    const double lm = kinebody::ik_batch_loss(q, batch, kin, cfg);
    return (lp - lm) / (2.0 * h);
  };
  auto rel = [](const Eigen::VectorXd& fd, const Eigen::VectorXd& an) {
    return (fd - an).norm() / std::max(fd.norm(), 1e-12);
  };
  double worst = 0.0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::VectorXd fd(layer.weight.size()), an(layer.weight.size());
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      fd[i] = fd_entry([&](kinebody::IKNetParams& q) -> double& { return q.layers[l].weight.data()[i]; });
      an[i] = g.weight[l].data()[i];
    }
    worst = std::max(worst, rel(fd, an));
    Eigen::VectorXd fdb(layer.bias.size());
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      fdb[i] = fd_entry([&](kinebody::IKNetParams& q) -> double& { return q.layers[l].bias[i]; });
    worst = std::max(worst, rel(fdb, g.bias[l]));
  }
  return worst;
}

/// Perturbs every weight and bias so the check does not sit at the
/// identity-output initialization.
inline void jitter(kinebody::IKNetParams& p, kinebody::Rng& rng, double sd) {
  for (auto& layer : p.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] += sd * rng.normal();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] += sd * rng.normal();
  }
}

}  // namespace oracle
