#pragma once

// Learned inverse kinematics: a fully-connected network from root-relative
// keypoints to per-joint 6D rotations, shape coefficients and a scale
// factor, trained with analytic gradients through the 6D conversion and
// forward kinematics.

#include "kinebody/assets.hpp"
#include "kinebody/body_model.hpp"
#include "kinebody/kba.hpp"
#include "kinebody/rng.hpp"
#include "kinebody/rotation.hpp"
#include "kinebody/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace kinebody {

// ---------------------------------------------------------------------------
// Kinematic parts.

/// A subtree of the rig solved by one network. The part root's rotation is
/// its global orientation; `local_parent` indexes into `joints`.
struct IkPart {
  std::string name;
  std::vector<int> joints;
  std::vector<int> local_parent;

  int size() const { return static_cast<int>(joints.size()); }
};

enum class PartKind { Body, LeftHand, RightHand };

inline IkPart make_ik_part(const BodyRig& rig, PartKind kind) {
  IkPart part;
  int root = 0;
  switch (kind) {
    case PartKind::Body:
      part.name = "body";
      root = rig.root();
      break;
    case PartKind::LeftHand:
      part.name = "left_hand";
      root = 20;
      break;
    case PartKind::RightHand:
      part.name = "right_hand";
      root = 21;
      break;
  }
  const int nj = rig.num_joints();
  std::vector<int> local(nj, -1);
  auto in_part = [&](int j) {
    if (kind == PartKind::Body) return j < kBodyJoints;
    for (int cur = j; cur != kNoParent; cur = rig.parent_index[cur])
      if (cur == root) return true;
    return false;
  };
  for (int j = 0; j < nj; ++j) {
    if (!in_part(j)) continue;
    local[j] = part.size();
    part.joints.push_back(j);
    part.local_parent.push_back(j == root ? kNoParent : local[rig.parent_index[j]]);
  }
  for (std::size_t k = 1; k < part.local_parent.size(); ++k)
    require(part.local_parent[k] >= 0 && part.local_parent[k] < static_cast<int>(k), ErrorKind::InvalidHierarchy,
            "IK part is not a topologically ordered subtree");
  return part;
}

inline PartKind parse_part_kind(const std::string& s) {
  if (s == "body") return PartKind::Body;
  if (s == "left_hand" || s == "hand") return PartKind::LeftHand;
  if (s == "right_hand") return PartKind::RightHand;
  throw Error(ErrorKind::InvalidArgument, "unknown IK part '" + s + "' (body|left_hand|right_hand)");
}

/// Rest joints of a part and their linear shape dependence.
struct IkKinematics {
  IkPart part;
  MatX3 rest;                    // part joints at beta = 0
  std::vector<MatX3> shape_dirs; // d rest / d beta_m, one per shape component

  static IkKinematics build(const BodyRig& rig, const IkPart& part) {
    IkKinematics k;
    k.part = part;
    const auto full_dirs = joint_shape_basis(rig);
    k.rest.resize(part.size(), 3);
    for (int i = 0; i < part.size(); ++i) k.rest.row(i) = rig.rest_joint_positions.row(part.joints[i]);
    for (const auto& d : full_dirs) {
      MatX3 m(part.size(), 3);
      for (int i = 0; i < part.size(); ++i) m.row(i) = d.row(part.joints[i]);
      k.shape_dirs.push_back(std::move(m));
    }
    return k;
  }

  int joints() const { return part.size(); }

  MatX3 shaped_rest(const VecX& beta) const {
    MatX3 out = rest;
    for (std::size_t m = 0; m < shape_dirs.size(); ++m) out += beta[static_cast<Eigen::Index>(m)] * shape_dirs[m];
    return out;
  }

  double mean_bone_length() const {
    double s = 0.0;
    int n = 0;
    for (int i = 0; i < joints(); ++i) {
      const int p = part.local_parent[i];
      if (p == kNoParent) continue;
      s += (rest.row(i) - rest.row(p)).norm();
      ++n;
    }
    return n ? s / n : 0.0;
  }
};

/// Root-relative FK over a part: p_root = 0, G_root = R_root,
/// G_c = G_p R_c, p_c = p_p + G_p (J_c - J_p).
inline MatX3 part_keypoints(const IkKinematics& kin, const std::vector<Mat3>& rotations, const VecX& beta) {
  const int n = kin.joints();
  require_dims(rotations.size(), static_cast<std::size_t>(n), "part rotation count");
  const MatX3 rest = kin.shaped_rest(beta);
  std::vector<Mat3> global(n);
  MatX3 out(n, 3);
  for (int i = 0; i < n; ++i) {
    const int p = kin.part.local_parent[i];
    if (p == kNoParent) {
      global[i] = rotations[i];
      out.row(i).setZero();
    } else {
      global[i] = global[p] * rotations[i];
      out.row(i) = out.row(p) + (global[p] * (rest.row(i) - rest.row(p)).transpose()).transpose();
    }
  }
  return out;
}

/// Reference-pose keypoints (all rotations identity) for a shape.
inline MatX3 part_reference_keypoints(const IkKinematics& kin, const VecX& beta) {
  const MatX3 rest = kin.shaped_rest(beta);
  const int root = 0;
  return rest.rowwise() - rest.row(root);
}

struct FkGradient {
  std::vector<Mat3> rotations;
  VecX beta;
};

/// Reverse-mode pass of part_keypoints for an upstream gradient on the
/// keypoints.
inline FkGradient part_keypoints_backward(const IkKinematics& kin, const std::vector<Mat3>& rotations,
                                          const VecX& beta, const MatX3& grad_points) {
  const int n = kin.joints();
  const MatX3 rest = kin.shaped_rest(beta);
  std::vector<Mat3> global(n);
  for (int i = 0; i < n; ++i) {
    const int p = kin.part.local_parent[i];
    global[i] = p == kNoParent ? rotations[i] : Mat3(global[p] * rotations[i]);
  }
  std::vector<Vec3> gp(n);
  for (int i = 0; i < n; ++i) gp[i] = grad_points.row(i).transpose();
  std::vector<Mat3> gg(n, Mat3::Zero());
  MatX3 grest = MatX3::Zero(n, 3);
  FkGradient out{std::vector<Mat3>(n, Mat3::Zero()), VecX::Zero(static_cast<Eigen::Index>(kin.shape_dirs.size()))};
  for (int i = n - 1; i >= 0; --i) {
    const int p = kin.part.local_parent[i];
    if (p == kNoParent) {
      out.rotations[i] = gg[i];
      continue;
    }
    const Vec3 offset = (rest.row(i) - rest.row(p)).transpose();
    gp[p] += gp[i];
    gg[p] += gp[i] * offset.transpose();
    const Vec3 goff = global[p].transpose() * gp[i];
    grest.row(i) += goff.transpose();
    grest.row(p) -= goff.transpose();
    gg[p] += gg[i] * rotations[i].transpose();
    out.rotations[i] = global[p].transpose() * gg[i];
  }
  for (std::size_t m = 0; m < kin.shape_dirs.size(); ++m)
    out.beta[static_cast<Eigen::Index>(m)] = grest.cwiseProduct(kin.shape_dirs[m]).sum();
  return out;
}

// ---------------------------------------------------------------------------
// Network.

enum class Activation { Linear, SiLU };

inline const char* to_string(Activation a) { return a == Activation::SiLU ? "silu" : "linear"; }

struct DenseLayer {
  MatX weight;  // out x in
  VecX bias;
  Activation activation = Activation::Linear;

  int inputs() const { return static_cast<int>(weight.cols()); }
  int outputs() const { return static_cast<int>(weight.rows()); }
};

struct IKNetParams {
  std::string part;
  int part_joints = 0;
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().inputs(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().outputs(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }
};

/// Rotations (6 per joint), then shape, then scale.
inline int iknet_output_width(int part_joints) { return 6 * part_joints + kShapeDims + 1; }

inline void validate(const IKNetParams& p) {
  require(!p.layers.empty(), ErrorKind::InvalidArgument, "IKNet has no layers");
  require(p.part_joints > 0, ErrorKind::InvalidArgument, "IKNet part_joints must be positive");
  require_dims(static_cast<std::size_t>(p.input_dim()), static_cast<std::size_t>(3 * p.part_joints), "IKNet input width");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    require(layer.bias.size() == layer.weight.rows(), ErrorKind::DimensionMismatch,
            "layer " + std::to_string(l) + " bias length");
    if (l > 0)
      require(layer.inputs() == p.layers[l - 1].outputs(), ErrorKind::DimensionMismatch,
              "layer " + std::to_string(l) + " input does not chain with previous output");
  }
  require_dims(static_cast<std::size_t>(p.output_dim()), static_cast<std::size_t>(iknet_output_width(p.part_joints)),
               "IKNet output width");
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

/// Xavier-uniform hidden layers; the output layer starts with small weights
/// and a bias encoding identity rotations, zero shape and unit scale.
inline IKNetParams make_iknet(int part_joints, const std::vector<int>& hidden, std::uint64_t seed,
                              const std::string& part_name = "body") {
  require(part_joints > 0, ErrorKind::InvalidArgument, "part_joints must be positive");
  Rng rng = Rng(seed).split("iknet_init");
  IKNetParams p;
  p.part = part_name;
  p.part_joints = part_joints;
  std::vector<int> widths{3 * part_joints};
  for (int h : hidden) {
    require(h > 0, ErrorKind::InvalidArgument, "hidden widths must be positive");
    widths.push_back(h);
  }
  widths.push_back(iknet_output_width(part_joints));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    const bool last = l + 2 == widths.size();
    const double limit = std::sqrt(6.0 / (widths[l] + widths[l + 1])) * (last ? 0.1 : 1.0);
    layer.weight.resize(widths[l + 1], widths[l]);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.uniform(-limit, limit);
    layer.bias = VecX::Zero(widths[l + 1]);
    layer.activation = last ? Activation::Linear : Activation::SiLU;
    p.layers.push_back(std::move(layer));
  }
  VecX& out_bias = p.layers.back().bias;
  for (int j = 0; j < part_joints; ++j) {
    out_bias[6 * j + 0] = 1.0;
    out_bias[6 * j + 4] = 1.0;
  }
  out_bias[out_bias.size() - 1] = 1.0;
  return p;
}

struct IkPrediction {
  std::vector<Vec6> rot6d;
  std::vector<Mat3> rotations;
  VecX beta = VecX::Zero(kShapeDims);
  double alpha = 1.0;
};

inline IkPrediction decode_iknet_output(const VecX& out, int part_joints) {
  require_dims(static_cast<std::size_t>(out.size()), static_cast<std::size_t>(iknet_output_width(part_joints)),
               "IKNet output width");
  IkPrediction pred;
  for (int j = 0; j < part_joints; ++j) {
    pred.rot6d.push_back(out.segment<6>(6 * j));
    pred.rotations.push_back(rot6d_to_matrix(pred.rot6d.back()));
  }
  pred.beta = out.segment(6 * part_joints, kShapeDims);
  pred.alpha = out[out.size() - 1];
  return pred;
}

/// Forward pass over a batch stored column-wise (features x batch). Keeps
/// the pre-activations and activations needed for backpropagation.
struct ForwardCache {
  std::vector<MatX> pre;   // z_l
  std::vector<MatX> post;  // a_l, post[0] = input
};

inline MatX iknet_forward_batch(const IKNetParams& params, const MatX& input, ForwardCache* cache = nullptr) {
  require(input.rows() == params.input_dim(), ErrorKind::DimensionMismatch, "IKNet input width");
  MatX a = input;
  if (cache) {
    cache->pre.clear();
    cache->post.assign(1, input);
  }
  for (const auto& layer : params.layers) {
    MatX z = layer.weight * a;
    z.colwise() += layer.bias;
    if (layer.activation == Activation::SiLU)
      a = z.unaryExpr([](double x) { return silu(x); });
    else
      a = z;
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
  }
  return a;
}

/// Runs the network on one set of root-relative keypoints (J x 3).
inline IkPrediction iknet_forward(const IKNetParams& params, const MatX3& keypoints) {
  validate(params);
  require(keypoints.rows() == params.part_joints, ErrorKind::DimensionMismatch, "IKNet keypoint count");
  VecX x(3 * params.part_joints);
  for (int j = 0; j < params.part_joints; ++j) x.segment<3>(3 * j) = keypoints.row(j).transpose();
  return decode_iknet_output(iknet_forward_batch(params, x).col(0), params.part_joints);
}

// ---------------------------------------------------------------------------
// Loss.

enum class Optimizer { Momentum, Adam };

struct IKTrainConfig {
  double lambda_alpha = 1.0;
  double lambda_beta = 0.01;
  double lambda_theta = 0.1;
  double lambda_chi = 1000.0;
  double lambda_chibar = 1000.0;

  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Momentum;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Batch gradients with a larger global L2 norm are rescaled to it; 0 disables.
  double max_grad_norm = 10.0;
  /// Learning rate at the last epoch as a fraction of the first (cosine decay).
  double final_lr_fraction = 0.05;
  std::vector<int> hidden = std::vector<int>(6, 1024);

  // Augmentation of the network input.
  double noise_stddev = 0.0;  // meters
  bool scale_augmentation = true;
  double scale_min = 0.85;
  double scale_max = 1.15;
  bool shape_sampling = true;

  // Sampling limits (radians).
  double body_limit = std::numbers::pi / 2.0;
  double finger_flex_max = 1.5;
  double finger_spread = 0.3;
};

inline void validate(const IKTrainConfig& c) {
  for (double w : {c.lambda_alpha, c.lambda_beta, c.lambda_theta, c.lambda_chi, c.lambda_chibar})
    require(w >= 0.0 && std::isfinite(w), ErrorKind::InvalidArgument, "IK loss weights must be >= 0");
  require(c.learning_rate > 0.0, ErrorKind::InvalidArgument, "learning rate must be > 0");
  require(c.batch_size > 0, ErrorKind::InvalidArgument, "batch size must be > 0");
  require(c.epochs >= 0, ErrorKind::InvalidArgument, "epochs must be >= 0");
  require(c.scale_min > 0.0 && c.scale_max >= c.scale_min, ErrorKind::InvalidArgument, "bad scale range");
  require(c.noise_stddev >= 0.0, ErrorKind::InvalidArgument, "noise must be >= 0");
  require(c.max_grad_norm >= 0.0, ErrorKind::InvalidArgument, "max_grad_norm must be >= 0");
}

/// Targets are expressed at the sample's scale: chi = alpha * FK(theta, beta)
/// and chi_bar = alpha * FK(identity, beta), both root-relative.
struct IkSample {
  MatX3 input;
  std::vector<Mat3> rotations;
  VecX beta = VecX::Zero(kShapeDims);
  double alpha = 1.0;
  MatX3 chi;
  MatX3 chi_bar;
};

struct IkLoss {
  double alpha = 0.0;
  double beta = 0.0;
  double theta = 0.0;
  double chi = 0.0;
  double chibar = 0.0;
  double total = 0.0;
};

/// lambda_a (a - a*)^2 + lambda_b |b - b*|^2 + lambda_t sum_j |R_j - R*_j|_F^2
/// + lambda_c |a FK(R, b) - chi|^2 + lambda_cb |a FK(I, b) - chi_bar|^2.
inline IkLoss ik_loss(const IkPrediction& pred, const IkSample& sample, const IkKinematics& kin,
                      const IKTrainConfig& cfg) {
  const int n = kin.joints();
  require_dims(pred.rotations.size(), static_cast<std::size_t>(n), "predicted rotation count");
  require_dims(sample.rotations.size(), static_cast<std::size_t>(n), "target rotation count");
  require_dims(static_cast<std::size_t>(pred.beta.size()), static_cast<std::size_t>(sample.beta.size()), "beta length");
  IkLoss l;
  l.alpha = (pred.alpha - sample.alpha) * (pred.alpha - sample.alpha);
  l.beta = (pred.beta - sample.beta).squaredNorm();
  for (int j = 0; j < n; ++j) l.theta += (pred.rotations[j] - sample.rotations[j]).squaredNorm();
  l.chi = (pred.alpha * part_keypoints(kin, pred.rotations, pred.beta) - sample.chi).squaredNorm();
  l.chibar = (pred.alpha * part_reference_keypoints(kin, pred.beta) - sample.chi_bar).squaredNorm();
  l.total = cfg.lambda_alpha * l.alpha + cfg.lambda_beta * l.beta + cfg.lambda_theta * l.theta +
            cfg.lambda_chi * l.chi + cfg.lambda_chibar * l.chibar;
  return l;
}

/// Gradient of ik_loss with respect to the raw network output vector.
inline VecX ik_loss_output_gradient(const IkPrediction& pred, const IkSample& sample, const IkKinematics& kin,
                                    const IKTrainConfig& cfg) {
  const int n = kin.joints();
  VecX g = VecX::Zero(iknet_output_width(n));
  double g_alpha = 2.0 * cfg.lambda_alpha * (pred.alpha - sample.alpha);
  VecX g_beta = 2.0 * cfg.lambda_beta * (pred.beta - sample.beta);
  std::vector<Mat3> g_rot(n);
  for (int j = 0; j < n; ++j) g_rot[j] = 2.0 * cfg.lambda_theta * (pred.rotations[j] - sample.rotations[j]);

  if (cfg.lambda_chi != 0.0) {
    const MatX3 posed = part_keypoints(kin, pred.rotations, pred.beta);
    const MatX3 err = pred.alpha * posed - sample.chi;
    g_alpha += 2.0 * cfg.lambda_chi * err.cwiseProduct(posed).sum();
    const FkGradient fk = part_keypoints_backward(kin, pred.rotations, pred.beta, 2.0 * cfg.lambda_chi * pred.alpha * err);
    for (int j = 0; j < n; ++j) g_rot[j] += fk.rotations[j];
    g_beta += fk.beta;
  }
  if (cfg.lambda_chibar != 0.0) {
    const MatX3 ref = part_reference_keypoints(kin, pred.beta);
    const MatX3 err = pred.alpha * ref - sample.chi_bar;
    g_alpha += 2.0 * cfg.lambda_chibar * err.cwiseProduct(ref).sum();
    // ref_i = J_i(beta) - J_root(beta)
    const MatX3 g_ref = 2.0 * cfg.lambda_chibar * pred.alpha * err;
    const Eigen::RowVector3d g_root = -g_ref.colwise().sum();
    for (std::size_t m = 0; m < kin.shape_dirs.size(); ++m)
      g_beta[static_cast<Eigen::Index>(m)] +=
          g_ref.cwiseProduct(kin.shape_dirs[m]).sum() + g_root.dot(kin.shape_dirs[m].row(0));
  }
  for (int j = 0; j < n; ++j) g.segment<6>(6 * j) = rot6d_to_matrix_backward(pred.rot6d[j], g_rot[j]);
  g.segment(6 * n, kShapeDims) = g_beta;
  g[g.size() - 1] = g_alpha;
  return g;
}

// ---------------------------------------------------------------------------
// Batch loss and parameter gradients.

struct IkGradients {
  std::vector<MatX> weight;
  std::vector<VecX> bias;
  double loss = 0.0;
};

inline MatX stack_inputs(const std::vector<const IkSample*>& batch, int part_joints) {
  MatX x(3 * part_joints, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (int j = 0; j < part_joints; ++j) x.col(static_cast<Eigen::Index>(b)).segment<3>(3 * j) = batch[b]->input.row(j).transpose();
  return x;
}

/// Mean ik_loss over the batch.
inline double ik_batch_loss(const IKNetParams& params, const std::vector<const IkSample*>& batch,
                            const IkKinematics& kin, const IKTrainConfig& cfg) {
  const MatX out = iknet_forward_batch(params, stack_inputs(batch, params.part_joints));
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b)
    loss += ik_loss(decode_iknet_output(out.col(static_cast<Eigen::Index>(b)), params.part_joints), *batch[b], kin, cfg).total;
  return loss / static_cast<double>(batch.size());
}

/// Mean batch loss and its gradient with respect to every weight and bias.
inline IkGradients ik_batch_gradients(const IKNetParams& params, const std::vector<const IkSample*>& batch,
                                      const IkKinematics& kin, const IKTrainConfig& cfg) {
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  ForwardCache cache;
  const MatX out = iknet_forward_batch(params, stack_inputs(batch, params.part_joints), &cache);
  const auto nb = static_cast<double>(batch.size());
  MatX delta(out.rows(), out.cols());
  IkGradients g;
  for (Eigen::Index b = 0; b < out.cols(); ++b) {
    const IkPrediction pred = decode_iknet_output(out.col(b), params.part_joints);
    const IkSample& s = *batch[static_cast<std::size_t>(b)];
    g.loss += ik_loss(pred, s, kin, cfg).total;
    delta.col(b) = ik_loss_output_gradient(pred, s, kin, cfg) / nb;
  }
  g.loss /= nb;
  const std::size_t nl = params.layers.size();
  g.weight.resize(nl);
  g.bias.resize(nl);
  for (std::size_t l = nl; l-- > 0;) {
    const auto& layer = params.layers[l];
    if (layer.activation == Activation::SiLU)
      delta = delta.cwiseProduct(cache.pre[l].unaryExpr([](double x) { return silu_grad(x); }));
    g.weight[l] = delta * cache.post[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    if (l > 0) delta = layer.weight.transpose() * delta;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Training data.

/// Axis-angle sample for one joint of a part. Body joints draw each
/// component uniformly in [-limit, limit]; fingers bend about the palm
/// normal with a small spread at the knuckle, thumbs move freely within
/// half the spread limit.
inline Vec3 sample_joint_axis_angle(Rng& rng, int joint, const IKTrainConfig& cfg) {
  if (joint < kBodyJoints) {
    const double lim = cfg.body_limit;
    return {rng.uniform(-lim, lim), rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
  }
  const int local = (joint - kBodyJoints) % kHandJointsPerSide;
  const bool left = joint - kBodyJoints < kHandJointsPerSide;
  const int finger = local / 3, knuckle = local % 3;
  if (finger == 0) {
    const double lim = cfg.finger_spread + 0.2;
    return {rng.uniform(-lim, lim), rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
  }
  const double flex = rng.uniform(-0.1, cfg.finger_flex_max);
  const double spread = knuckle == 0 ? rng.uniform(-cfg.finger_spread, cfg.finger_spread) : 0.0;
  // Fingers point along +x (left) / -x (right); curling toward -y.
  return {0.0, spread, left ? -flex : flex};
}

inline IkSample make_ik_sample(const IkKinematics& kin, std::vector<Mat3> rotations, const VecX& beta, double alpha) {
  IkSample s;
  s.rotations = std::move(rotations);
  s.beta = beta;
  s.alpha = alpha;
  s.chi = alpha * part_keypoints(kin, s.rotations, beta);
  s.chi_bar = alpha * part_reference_keypoints(kin, beta);
  s.input = s.chi;
  return s;
}

/// Deterministic synthetic dataset. Each sample uses its own sub-stream of
/// the seed, so sample k is independent of n.
inline std::vector<IkSample> generate_ik_training_set(const IkKinematics& kin, int n, std::uint64_t seed,
                                                      const IKTrainConfig& cfg) {
  require(n > 0, ErrorKind::InvalidArgument, "dataset size must be > 0");
  validate(cfg);
  const Rng base = Rng(seed).split("ik_dataset");
  std::vector<IkSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Rng rng = base.split(static_cast<std::uint64_t>(k));
    std::vector<Mat3> rot;
    for (int j : kin.part.joints) rot.push_back(axis_angle_to_matrix(sample_joint_axis_angle(rng, j, cfg)));
    VecX beta = VecX::Zero(kShapeDims);
    if (cfg.shape_sampling)
      for (int m = 0; m < kShapeDims; ++m) beta[m] = std::clamp(rng.normal(), -3.0, 3.0);
    const double alpha = cfg.scale_augmentation ? rng.uniform(cfg.scale_min, cfg.scale_max) : 1.0;
    IkSample s = make_ik_sample(kin, std::move(rot), beta, alpha);
    if (cfg.noise_stddev > 0.0)
      for (Eigen::Index i = 0; i < s.input.size(); ++i) s.input.data()[i] += rng.normal(0.0, cfg.noise_stddev);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  IKNetParams params;
  std::vector<EpochLog> log;
};

inline std::string format_training_log(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "# epoch mean_loss learning_rate\n";
  for (const auto& e : log) os << e.epoch << ' ' << e.mean_loss << ' ' << e.learning_rate << '\n';
  return os.str();
}

/// Mini-batch gradient descent (momentum or Adam) on the mean batch loss,
/// with per-epoch shuffling from the config seed. Training is single
/// threaded and bit-reproducible for a fixed seed and config.
inline TrainResult train_iknet(const IkKinematics& kin, const std::vector<IkSample>& dataset, const IKTrainConfig& cfg,
                               IKNetParams params) {
  validate(cfg);
  validate(params);
  require(!dataset.empty(), ErrorKind::InvalidArgument, "training set is empty");
  require(params.part_joints == kin.joints(), ErrorKind::DimensionMismatch, "network and part joint counts differ");

  const std::size_t nl = params.layers.size();
  std::vector<MatX> mw(nl), vw(nl);
  std::vector<VecX> mb(nl), vb(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    mw[l] = MatX::Zero(params.layers[l].weight.rows(), params.layers[l].weight.cols());
    vw[l] = mw[l];
    mb[l] = VecX::Zero(params.layers[l].bias.size());
    vb[l] = mb[l];
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const Rng shuffle_base = Rng(cfg.seed).split("ik_shuffle");
  TrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = shuffle_base.split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.learning_rate *
                      (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const IkSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset[order[i]]);
      IkGradients g = ik_batch_gradients(params, batch, kin, cfg);
      if (!std::isfinite(g.loss))
        throw Error(ErrorKind::Numerical, "IK training diverged at epoch " + std::to_string(epoch) + ", batch starting " +
                                              std::to_string(start) + " (loss " + std::to_string(g.loss) + ")");
      if (cfg.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (std::size_t l = 0; l < nl; ++l) sq += g.weight[l].squaredNorm() + g.bias[l].squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.max_grad_norm) {
          const double s = cfg.max_grad_norm / norm;
          for (std::size_t l = 0; l < nl; ++l) {
            g.weight[l] *= s;
            g.bias[l] *= s;
          }
        }
      }
      loss_sum += g.loss * static_cast<double>(batch.size());
      seen += batch.size();
      ++step;
      for (std::size_t l = 0; l < nl; ++l) {
        auto& layer = params.layers[l];
        if (cfg.optimizer == Optimizer::Momentum) {
          mw[l] = cfg.momentum * mw[l] - lr * g.weight[l];
          mb[l] = cfg.momentum * mb[l] - lr * g.bias[l];
          layer.weight += mw[l];
          layer.bias += mb[l];
        } else {
          const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
          mw[l] = cfg.adam_beta1 * mw[l] + (1.0 - cfg.adam_beta1) * g.weight[l];
          vw[l] = cfg.adam_beta2 * vw[l] + (1.0 - cfg.adam_beta2) * g.weight[l].cwiseAbs2();
          mb[l] = cfg.adam_beta1 * mb[l] + (1.0 - cfg.adam_beta1) * g.bias[l];
          vb[l] = cfg.adam_beta2 * vb[l] + (1.0 - cfg.adam_beta2) * g.bias[l].cwiseAbs2();
          const double eps = cfg.adam_epsilon;
          layer.weight.array() -= lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + eps);
          layer.bias.array() -= lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + eps);
        }
      }
    }
    result.log.push_back({epoch, loss_sum / static_cast<double>(seen), lr});
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train_iknet(const IkKinematics& kin, const std::vector<IkSample>& dataset, const IKTrainConfig& cfg) {
  return train_iknet(kin, dataset, cfg, make_iknet(kin.joints(), cfg.hidden, cfg.seed, kin.part.name));
}

/// Mean posed-keypoint distance (meters) between alpha * FK(prediction) and
/// each sample's chi.
inline double posed_keypoint_error(const IKNetParams& params, const std::vector<IkSample>& samples,
                                   const IkKinematics& kin) {
  require(!samples.empty(), ErrorKind::InvalidArgument, "no samples");
  double sum = 0.0;
  std::size_t count = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    std::vector<const IkSample*> batch;
    for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) batch.push_back(&samples[i]);
    const MatX out = iknet_forward_batch(params, stack_inputs(batch, params.part_joints));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const IkPrediction pred = decode_iknet_output(out.col(static_cast<Eigen::Index>(b)), params.part_joints);
      const MatX3 posed = pred.alpha * part_keypoints(kin, pred.rotations, pred.beta);
      sum += (posed - batch[b]->chi).rowwise().norm().sum();
      count += static_cast<std::size_t>(posed.rows());
    }
  }
  return sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Storage (kind "iknet": per layer "W<l>", "b<l>", activation codes, part info).

inline KbaFile to_kba(const IKNetParams& p) {
  KbaFile f("iknet");
  std::vector<std::uint32_t> acts;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    put_matrix(f, "W" + std::to_string(l), p.layers[l].weight);
    f.add_f64("b" + std::to_string(l), {static_cast<std::uint64_t>(p.layers[l].bias.size())},
              std::vector<double>(p.layers[l].bias.data(), p.layers[l].bias.data() + p.layers[l].bias.size()));
    acts.push_back(p.layers[l].activation == Activation::SiLU ? 1u : 0u);
  }
  const std::uint64_t n_acts = acts.size();
  f.add_u32("activations", {n_acts}, std::move(acts));
  f.add_u32("part_joints", {1}, {static_cast<std::uint32_t>(p.part_joints)});
  std::vector<std::uint32_t> name(p.part.begin(), p.part.end());
  const std::uint64_t n_name = name.size();
  f.add_u32("part_name", {n_name}, std::move(name));
  return f;
}

inline IKNetParams iknet_from_kba(const KbaFile& f) {
  require(f.kind() == "iknet", ErrorKind::SchemaMismatch, "expected kind iknet, got " + f.kind());
  IKNetParams p;
  const auto& acts = f.get("activations", DType::U32, 1);
  p.part_joints = static_cast<int>(f.get("part_joints", DType::U32, 1).u32.at(0));
  for (auto c : f.get("part_name", DType::U32, 1).u32) p.part.push_back(static_cast<char>(c));
  for (std::size_t l = 0; l < acts.u32.size(); ++l) {
    DenseLayer layer;
    layer.weight = get_matrix(f, "W" + std::to_string(l));
    const auto& b = f.get("b" + std::to_string(l), DType::F64, 1);
    layer.bias = Eigen::Map<const VecX>(b.f64.data(), static_cast<Eigen::Index>(b.f64.size()));
    require(acts.u32[l] <= 1, ErrorKind::SchemaMismatch, "unknown activation code");
    layer.activation = acts.u32[l] == 1 ? Activation::SiLU : Activation::Linear;
    p.layers.push_back(std::move(layer));
  }
  validate(p);
  return p;
}

}  // namespace kinebody
