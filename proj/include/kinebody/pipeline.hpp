#pragma once

// Synthetic end-to-end run: rig -> poses -> ground-truth maps -> decoding ->
// hand/face localization -> learned IK -> global translation -> face merge,
// plus file-based evaluation.

#include "kinebody/assets.hpp"
#include "kinebody/body_model.hpp"
#include "kinebody/face_model.hpp"
#include "kinebody/geometry.hpp"
#include "kinebody/ik.hpp"
#include "kinebody/io.hpp"
#include "kinebody/maps.hpp"
#include "kinebody/rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace kinebody {

struct PipelineConfig {
  std::uint64_t seed = 0;
  int body_vertices = 2000;
  int face_vertices = 300;
  int poses = 3;
  int map_size = 64;
  double sigma = kDefaultSigma;
  LocalizeConfig hand_localize{0.95, 1};
  LocalizeConfig face_localize{0.95, 1};
  int crop_size = 16;
  double focal = 70.0;            // pixels
  double camera_distance = 4.0;   // meters, camera to pelvis
  double location_noise = 0.0;    // stddev (m) added to predicted location maps
  int ik_samples = 2000;
  IKTrainConfig ik = default_ik();
  std::string output_dir;

  static IKTrainConfig default_ik() {
    IKTrainConfig c;
    c.hidden = {128, 128};
    c.epochs = 4;
    c.batch_size = 16;
    c.optimizer = Optimizer::Adam;
    c.learning_rate = 2e-3;
    return c;
  }
};

inline void validate(const PipelineConfig& c) {
  require(c.poses > 0, ErrorKind::InvalidArgument, "poses must be > 0");
  require(c.map_size >= 8, ErrorKind::InvalidArgument, "map_size must be >= 8");
  require(c.sigma > 0.0, ErrorKind::InvalidArgument, "sigma must be > 0");
  require(c.crop_size > 0, ErrorKind::InvalidArgument, "crop_size must be > 0");
  require(c.focal > 0.0 && c.camera_distance > 1.5, ErrorKind::InvalidArgument,
          "focal must be > 0 and camera_distance > 1.5 m");
  require(c.location_noise >= 0.0, ErrorKind::InvalidArgument, "location_noise must be >= 0");
  require(c.ik_samples > 0, ErrorKind::InvalidArgument, "ik_samples must be > 0");
  for (const auto* l : {&c.hand_localize, &c.face_localize})
    require(l->threshold > 0.0 && l->threshold <= 1.0 && l->step >= 1, ErrorKind::InvalidArgument,
            "localize threshold must be in (0, 1] and step >= 1");
  validate(c.ik);
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& where) {
  std::vector<int> out;
  std::string tok;
  std::istringstream in(s);
  while (std::getline(in, tok, ',')) {
    const double v = parse_double(tok, where);
    require(v >= 1.0 && v == std::floor(v), ErrorKind::Parse, where + ": expected positive integers");
    out.push_back(static_cast<int>(v));
  }
  require(!out.empty(), ErrorKind::Parse, where + ": empty list");
  return out;
}

/// Applies `key value` pairs to a config; unknown keys are rejected.
inline void apply_config(PipelineConfig& c, const std::map<std::string, std::string>& kv, const std::string& source) {
  auto num = [&](const std::string& k, const std::string& v) { return parse_double(v, source + ": " + k); };
  auto integer = [&](const std::string& k, const std::string& v) {
    const double d = num(k, v);
    require(d == std::floor(d) && std::abs(d) < 1e15, ErrorKind::Parse, source + ": " + k + " must be an integer");
    return static_cast<long long>(d);
  };
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters{
      {"seed", [&](auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(integer(k, v)); }},
      {"body_vertices", [&](auto& k, auto& v) { c.body_vertices = static_cast<int>(integer(k, v)); }},
      {"face_vertices", [&](auto& k, auto& v) { c.face_vertices = static_cast<int>(integer(k, v)); }},
      {"poses", [&](auto& k, auto& v) { c.poses = static_cast<int>(integer(k, v)); }},
      {"map_size", [&](auto& k, auto& v) { c.map_size = static_cast<int>(integer(k, v)); }},
      {"sigma", [&](auto& k, auto& v) { c.sigma = num(k, v); }},
      {"hand_threshold", [&](auto& k, auto& v) { c.hand_localize.threshold = num(k, v); }},
      {"hand_step", [&](auto& k, auto& v) { c.hand_localize.step = static_cast<int>(integer(k, v)); }},
      {"face_threshold", [&](auto& k, auto& v) { c.face_localize.threshold = num(k, v); }},
      {"face_step", [&](auto& k, auto& v) { c.face_localize.step = static_cast<int>(integer(k, v)); }},
      {"crop_size", [&](auto& k, auto& v) { c.crop_size = static_cast<int>(integer(k, v)); }},
      {"focal", [&](auto& k, auto& v) { c.focal = num(k, v); }},
      {"camera_distance", [&](auto& k, auto& v) { c.camera_distance = num(k, v); }},
      {"location_noise", [&](auto& k, auto& v) { c.location_noise = num(k, v); }},
      {"ik_samples", [&](auto& k, auto& v) { c.ik_samples = static_cast<int>(integer(k, v)); }},
      {"ik_epochs", [&](auto& k, auto& v) { c.ik.epochs = static_cast<int>(integer(k, v)); }},
      {"ik_batch", [&](auto& k, auto& v) { c.ik.batch_size = static_cast<int>(integer(k, v)); }},
      {"ik_lr", [&](auto& k, auto& v) { c.ik.learning_rate = num(k, v); }},
      {"ik_hidden", [&](auto& k, auto& v) { c.ik.hidden = parse_int_list(v, source + ": " + k); }},
      {"ik_optimizer",
       [&](auto& k, auto& v) {
         if (v == "adam") c.ik.optimizer = Optimizer::Adam;
         else if (v == "momentum") c.ik.optimizer = Optimizer::Momentum;
         else throw Error(ErrorKind::Parse, source + ": " + k + " must be adam or momentum");
       }},
      {"ik_noise", [&](auto& k, auto& v) { c.ik.noise_stddev = num(k, v); }},
      {"ik_clip", [&](auto& k, auto& v) { c.ik.max_grad_norm = num(k, v); }},
      {"lambda_alpha", [&](auto& k, auto& v) { c.ik.lambda_alpha = num(k, v); }},
      {"lambda_beta", [&](auto& k, auto& v) { c.ik.lambda_beta = num(k, v); }},
      {"lambda_theta", [&](auto& k, auto& v) { c.ik.lambda_theta = num(k, v); }},
      {"lambda_chi", [&](auto& k, auto& v) { c.ik.lambda_chi = num(k, v); }},
      {"lambda_chibar", [&](auto& k, auto& v) { c.ik.lambda_chibar = num(k, v); }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
  };
  for (const auto& [key, value] : kv) {
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorKind::Parse, source + ": unknown key '" + key + "'");
    it->second(key, value);
  }
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig c;
  apply_config(c, parse_key_values(read_text_file(path), path), path);
  return c;
}

namespace detail {

/// Runs one stage, prefixing any module error with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(name) + ": " + e.what());
  }
}

inline nlohmann::json to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline nlohmann::json to_json(const Window& w) { return {{"side", w.w}, {"u", w.u}, {"v", w.v}, {"mass", w.mass}}; }

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"mpjpe_mm", r.mpjpe}, {"mpjpe_pa_mm", r.mpjpe_pa}};
  j["per_joint_mm"] = std::vector<double>(r.per_joint.data(), r.per_joint.data() + r.per_joint.size());
  j["landmark_error_px"] = r.landmark_error ? nlohmann::json(*r.landmark_error) : nlohmann::json(nullptr);
  j["photometric_error"] = r.photometric_error ? to_json(*r.photometric_error) : nlohmann::json(nullptr);
  return j;
}

inline MetricReport joint_metrics(const MatX3& pred, const MatX3& gt) {
  MetricReport r;
  r.per_joint = per_joint_errors(pred, gt, MpjpeMode::RootRelative);
  r.mpjpe = r.per_joint.mean();
  r.mpjpe_pa = mpjpe(pred, gt, MpjpeMode::Procrustes);
  return r;
}

inline MatX3 select_rows(const MatX3& m, const std::vector<int>& ids) {
  MatX3 out(static_cast<Eigen::Index>(ids.size()), 3);
  for (std::size_t k = 0; k < ids.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(ids[k]);
  return out;
}

inline MatX2 project_rows(const Camera& cam, const MatX3& pts) {
  MatX2 out(pts.rows(), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) out.row(i) = cam.project(pts.row(i).transpose()).transpose();
  return out;
}

/// Gaussian K maps only (D/L zero) for localization of a keypoint group.
inline Tensor3 keypoint_maps(const MatX2& px, int size, double sigma) {
  const MatX3 zeros = MatX3::Zero(px.rows(), 3);
  return build_gt_maps(px, zeros, zeros, size, size, sigma).K;
}

inline double window_coverage(const Window& w, const MatX2& px) {
  int inside = 0;
  for (Eigen::Index i = 0; i < px.rows(); ++i) {
    const double u = px(i, 0), v = px(i, 1);
    inside += u >= w.u - 0.5 && u <= w.u + w.w - 0.5 && v >= w.v - 0.5 && v <= w.v + w.w - 0.5;
  }
  return static_cast<double>(inside) / static_cast<double>(px.rows());
}

}  // namespace detail

/// Depth of a shared parent from several bones: each bone yields up to two
/// admissible roots; the candidate of the first bone closest to some
/// admissible root of every other bone wins.
inline double consensus_depth(const std::vector<TranslationSolution>& sols) {
  require(!sols.empty(), ErrorKind::InvalidArgument, "no translation solutions");
  double best = sols[0].depth, best_cost = std::numeric_limits<double>::infinity();
  for (double z : sols[0].admissible) {
    double cost = 0.0;
    for (std::size_t k = 1; k < sols.size(); ++k) {
      double nearest = std::numeric_limits<double>::infinity();
      for (double y : sols[k].admissible) nearest = std::min(nearest, std::abs(y - z));
      cost += nearest;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = z;
    }
  }
  return best;
}

struct PipelineResult {
  nlohmann::json report;
  std::string report_text;  // report serialized with a fixed layout
};

/// The camera looks down +z; world (y up, body facing +z) maps to camera
/// coordinates by a half turn about x followed by the camera distance.
inline Mat3 world_to_camera_rotation() {
  Mat3 r = Mat3::Identity();
  r(1, 1) = -1.0;
  r(2, 2) = -1.0;
  return r;
}

inline PipelineResult run_synthetic_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  namespace fs = std::filesystem;
  using nlohmann::json;
  const Rng root(cfg.seed);
  const bool write = !cfg.output_dir.empty();
  if (write) fs::create_directories(cfg.output_dir);
  auto out_path = [&](const std::string& name) { return (fs::path(cfg.output_dir) / name).string(); };

  const auto assets = detail::stage("synth", [&] {
    return generate_synthetic_rig(root.split("rig").next_u64(), cfg.body_vertices, cfg.face_vertices);
  });
  const BodyRig& rig = assets.rig;

  // IK network for the body part, trained on FK-generated samples.
  const IkKinematics kin = IkKinematics::build(rig, make_ik_part(rig, PartKind::Body));
  IKTrainConfig ikcfg = cfg.ik;
  ikcfg.seed = root.split("ik_train").next_u64();
  const auto trained = detail::stage("train-ik", [&] {
    const auto data = generate_ik_training_set(kin, cfg.ik_samples, root.split("ik_data").next_u64(), ikcfg);
    return train_iknet(kin, data, ikcfg);
  });

  const Camera cam = Camera::from_params(cfg.focal, cfg.focal, 0.5 * (cfg.map_size - 1), 0.5 * (cfg.map_size - 1));
  const Mat3 r_wc = world_to_camera_rotation();
  const Vec3 t_wc(0.0, 0.0, cfg.camera_distance);
  const std::vector<int> body_ids = kin.part.joints;
  const int nb = static_cast<int>(body_ids.size());
  const std::vector<int> pelvis_children{1, 2, 3};

  json poses = json::array();
  double sum_dec = 0, sum_dec_pa = 0, sum_ik = 0, sum_ik_pa = 0, sum_lm = 0;
  double max_t_err = 0, max_t_err_dec = 0;

  for (int pi = 0; pi < cfg.poses; ++pi) {
    Rng prng = root.split("pose").split(static_cast<std::uint64_t>(pi));
    const std::string label = "pose " + std::to_string(pi);

    // Sample a pose whose keypoints all project well inside the map.
    ShapeParams shape;
    Pose pose;
    PosedBody posed;
    MatX3 cam_joints;
    MatX2 px;
    detail::stage("sample", [&] {
      for (int attempt = 0;; ++attempt) {
        if (attempt == 200) throw Error(ErrorKind::Infeasible, label + ": no in-view pose after 200 draws");
        shape = ShapeParams{};
        for (int m = 0; m < kShapeDims; ++m) shape.beta[m] = std::clamp(prng.normal(), -3.0, 3.0);
        std::vector<Vec3> aa;
        for (int j = 0; j < rig.num_joints(); ++j) aa.push_back(sample_joint_axis_angle(prng, j, ikcfg));
        const Vec3 jitter(prng.uniform(-0.2, 0.2), prng.uniform(-0.2, 0.2), prng.uniform(-0.3, 0.3));
        pose = Pose::from_axis_angle(aa, jitter - Vec3(rig.rest_joint_positions.row(rig.root())));
        posed = pose_body(rig, shape, pose);
        cam_joints = (posed.joint_positions * r_wc.transpose()).rowwise() + t_wc.transpose();
        px = detail::project_rows(cam, cam_joints);
        const double lo = 1.0, hi = cfg.map_size - 2.0;
        if ((cam_joints.col(2).array() > 0.5).all() && (px.array() >= lo).all() && (px.array() <= hi).all()) return 0;
      }
    });

    // Body maps: rounded pixel centers, camera-frame root-relative 3D, unit bone directions.
    const MatX3 gt_cam_rel = detail::select_rows(cam_joints, body_ids).rowwise() - cam_joints.row(rig.root());
    MatX3 bone_dirs = MatX3::Zero(nb, 3);
    for (int i = 0; i < nb; ++i) {
      const int p = kin.part.local_parent[static_cast<std::size_t>(i)];
      if (p != kNoParent) bone_dirs.row(i) = (gt_cam_rel.row(i) - gt_cam_rel.row(p)).normalized();
    }
    MatX2 body_px(nb, 2);
    for (int i = 0; i < nb; ++i) body_px.row(i) = px.row(body_ids[static_cast<std::size_t>(i)]).array().round();
    MapStack maps = detail::stage("maps", [&] {
      return build_gt_maps(body_px, gt_cam_rel, bone_dirs, cfg.map_size, cfg.map_size, cfg.sigma);
    });
    if (cfg.location_noise > 0.0)
      for (auto& v : maps.L.data) v += prng.normal(0.0, cfg.location_noise);
    const DecodedKeypoints dec = detail::stage("decode", [&] { return decode_keypoints(maps); });
    const MetricReport dec_metrics = detail::joint_metrics(dec.coords, gt_cam_rel);
    int detected = 0;
    for (bool d : dec.detected) detected += d;

    // Hands: heat-map from the hand's keypoint maps, window, crop, attention input.
    json hands = json::object();
    Tensor3 body_features = maps.K;
    for (int side = 0; side < 2; ++side) {
      const int wrist = side == 0 ? 20 : 21;
      std::vector<int> ids{wrist};
      for (int k = 0; k < kHandJointsPerSide; ++k) ids.push_back(kBodyJoints + kHandJointsPerSide * side + k);
      MatX2 hpx(static_cast<Eigen::Index>(ids.size()), 2);
      for (std::size_t k = 0; k < ids.size(); ++k) hpx.row(static_cast<Eigen::Index>(k)) = px.row(ids[k]);
      const Tensor3 hk = detail::keypoint_maps(hpx, cfg.map_size, cfg.sigma);
      const Window win = detail::stage("localize-hand", [&] { return localize_window(heatmap_from_kmaps(hk), cfg.hand_localize); });
      const Tensor3 input = detail::stage("crop-hand", [&] {
        return assemble_hand_input(crop_resize_bilinear(body_features, win, cfg.crop_size, cfg.crop_size),
                                   crop_resize_bilinear(hk, win, cfg.crop_size, cfg.crop_size), true);
      });
      double checksum = 0.0;
      for (double v : input.data) checksum += v;
      hands[side == 0 ? "left" : "right"] = {{"window", detail::to_json(win)},
                                             {"coverage", detail::window_coverage(win, hpx)},
                                             {"input_shape", input.shape_string()},
                                             {"input_sum", checksum}};
    }

    // IK on decoded keypoints, brought back to the body's world orientation.
    const MatX3 ik_in = dec.coords * r_wc;  // rows: R^T x
    const IkPrediction ikp = detail::stage("ik", [&] { return iknet_forward(trained.params, ik_in); });
    const MatX3 ik_posed = ikp.alpha * part_keypoints(kin, ikp.rotations, ikp.beta);
    const MatX3 gt_world_rel = gt_cam_rel * r_wc;
    const MetricReport ik_metrics = detail::joint_metrics(ik_posed, gt_world_rel);

    // Global translation from the pelvis and its three child bones.
    const Vec3 true_root = cam_joints.row(rig.root());
    auto solve_from = [&](const MatX2& pix2d) {
      std::vector<TranslationSolution> sols;
      for (int c : pelvis_children) {
        TranslationProblem tp;
        tp.camera = cam;
        tp.parent_2d = pix2d.row(0);
        tp.child_2d = pix2d.row(c);
        tp.parent_depth = dec.coords(0, 2);
        tp.child_depth = dec.coords(c, 2);
        tp.bone_length = (dec.coords.row(c) - dec.coords.row(0)).norm();
        sols.push_back(solve_global_translation(tp));
      }
      const double z = consensus_depth(sols);
      return std::make_pair(sols, Vec3(z * cam.back_project(pix2d.row(0))));
    };
    MatX2 exact_px(nb, 2);
    for (int i = 0; i < nb; ++i) exact_px.row(i) = px.row(body_ids[static_cast<std::size_t>(i)]);
    const auto [sols, t_est] = detail::stage("translation", [&] { return solve_from(exact_px); });
    double t_err_dec = std::numeric_limits<double>::quiet_NaN();
    try {
      t_err_dec = (solve_from(dec.pixels).second - true_root).norm();
    } catch (const Error&) {
      // Rounded pixels can make a bone unreachable; reported as null.
    }
    const double t_err = (t_est - true_root).norm();
    json roots = json::array();
    for (const auto& s : sols) roots.push_back({{"roots", s.roots}, {"admissible", s.admissible}});

    // Face: shading, placement on the posed head, stitching, landmark localization.
    FaceParams fp;
    Rng frng = prng.split("face");
    for (auto* v : {&fp.zeta, &fp.epsilon, &fp.gamma})
      for (Eigen::Index k = 0; k < v->size(); ++k) (*v)[k] = frng.normal(0.0, 0.5);
    for (int c = 0; c < 3; ++c) {
      fp.mu(c, 0) = frng.uniform(2.5, 3.5);
      for (int b = 1; b < kShBands; ++b) fp.mu(c, b) = frng.normal(0.0, 0.3);
    }
    const ShadedFace shaded = detail::stage("face", [&] { return shade_face(assets.face, fp); });
    const MergedMesh merged = detail::stage("merge", [&] {
      return merge_face_body(posed, rig, shaded.vertices, assets.face, assets.merge, head_rotation(posed, assets.merge));
    });
    MatX2 lm_px(static_cast<Eigen::Index>(assets.face.landmark_ids.size()), 2);
    for (std::size_t k = 0; k < assets.face.landmark_ids.size(); ++k) {
      const Vec3 w = merged.vertices.row(merged.face_offset + assets.face.landmark_ids[k]);
      lm_px.row(static_cast<Eigen::Index>(k)) = cam.project(r_wc * w + t_wc).transpose();
    }
    const Tensor3 face_k = detail::keypoint_maps(lm_px, cfg.map_size, cfg.sigma);
    const Window face_win =
        detail::stage("localize-face", [&] { return localize_window(heatmap_from_kmaps(face_k), cfg.face_localize); });
    MapStack face_maps{face_k, Tensor3(3 * face_k.channels, cfg.map_size, cfg.map_size),
                       Tensor3(3 * face_k.channels, cfg.map_size, cfg.map_size)};
    const double lm_err = landmark_error(decode_keypoints(face_maps).pixels, lm_px);

    sum_dec += dec_metrics.mpjpe;
    sum_dec_pa += dec_metrics.mpjpe_pa;
    sum_ik += ik_metrics.mpjpe;
    sum_ik_pa += ik_metrics.mpjpe_pa;
    sum_lm += lm_err;
    max_t_err = std::max(max_t_err, t_err);
    if (!std::isnan(t_err_dec)) max_t_err_dec = std::max(max_t_err_dec, t_err_dec);

    poses.push_back({
        {"index", pi},
        {"decode", {{"metrics", detail::to_json(dec_metrics)}, {"detected", detected}}},
        {"ik", {{"metrics", detail::to_json(ik_metrics)}, {"alpha", ikp.alpha}}},
        {"translation",
         {{"true_m", detail::to_json(true_root)},
          {"estimate_m", detail::to_json(t_est)},
          {"error_m", t_err},
          {"error_from_decoded_pixels_m", std::isnan(t_err_dec) ? json(nullptr) : json(t_err_dec)},
          {"bones", roots}}},
        {"hands", hands},
        {"face",
         {{"window", detail::to_json(face_win)},
          {"coverage", detail::window_coverage(face_win, lm_px)},
          {"landmark_error_px", lm_err}}},
        {"merge",
         {{"vertices", merged.vertices.rows()},
          {"stitch_triangles", merged.stitch_triangles.size()},
          {"face_offset", merged.face_offset}}},
    });

    if (write) {
      std::vector<Triangle> tris = merged.stitch_triangles;
      for (const auto& t : assets.face.triangles)
        tris.push_back({t[0] + merged.face_offset, t[1] + merged.face_offset, t[2] + merged.face_offset});
      MatX3 colors = MatX3::Constant(merged.vertices.rows(), 3, 0.6);
      colors.bottomRows(shaded.radiosity.rows()) = shaded.radiosity.cwiseMax(0.0).cwiseMin(1.0);
      const std::string stem = "pose_" + std::to_string(pi);
      write_text_file(out_path(stem + "_mesh.obj"), format_obj(merged.vertices, tris, &colors));
      write_text_file(out_path(stem + "_keypoints.txt"), format_keypoints(dec));
    }
  }

  const double n = cfg.poses;
  json log = json::array();
  for (const auto& e : trained.log) log.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.learning_rate}});
  json report{
      {"seed", cfg.seed},
      {"config",
       {{"body_vertices", cfg.body_vertices},
        {"face_vertices", cfg.face_vertices},
        {"poses", cfg.poses},
        {"map_size", cfg.map_size},
        {"sigma", cfg.sigma},
        {"hand_threshold", cfg.hand_localize.threshold},
        {"face_threshold", cfg.face_localize.threshold},
        {"location_noise", cfg.location_noise},
        {"ik_samples", cfg.ik_samples},
        {"ik_epochs", cfg.ik.epochs},
        {"ik_hidden", cfg.ik.hidden}}},
      {"ik_training", {{"mean_bone_length_m", kin.mean_bone_length()}, {"log", log}}},
      {"poses", poses},
      {"summary",
       {{"decode_mpjpe_mm", sum_dec / n},
        {"decode_mpjpe_pa_mm", sum_dec_pa / n},
        {"ik_mpjpe_mm", sum_ik / n},
        {"ik_mpjpe_pa_mm", sum_ik_pa / n},
        {"translation_error_max_m", max_t_err},
        {"translation_error_from_decoded_pixels_max_m", max_t_err_dec},
        {"face_landmark_error_px", sum_lm / n}}},
  };
  PipelineResult result{report, report.dump(2) + "\n"};
  if (write) {
    write_text_file(out_path("report.json"), result.report_text);
    write_text_file(out_path("training_log.txt"), format_training_log(trained.log));
    write_kba(out_path("iknet.kba"), to_kba(trained.params));
  }
  return result;
}

// ---------------------------------------------------------------------------
// File evaluation.

struct EvalInputs {
  std::string pred_path;
  std::string gt_path;
  MpjpeMode mode = MpjpeMode::RootRelative;
  std::string pred_colors_path;  // optional
  std::string gt_colors_path;    // optional
};

/// Both MPJPE variants are always computed; `per_joint` follows `mode`.
/// Landmark error is reported when both files carry pixel columns.
inline MetricReport evaluate_files(const EvalInputs& in) {
  const auto pred = parse_keypoint_text(read_text_file(in.pred_path), in.pred_path);
  const auto gt = parse_keypoint_text(read_text_file(in.gt_path), in.gt_path);
  require(pred.points.rows() == gt.points.rows(), ErrorKind::DimensionMismatch,
          "joint counts differ: " + std::to_string(pred.points.rows()) + " vs " + std::to_string(gt.points.rows()));
  MetricReport r;
  r.mpjpe = mpjpe(pred.points, gt.points, MpjpeMode::RootRelative);
  r.mpjpe_pa = pred.points.rows() >= 3 ? mpjpe(pred.points, gt.points, MpjpeMode::Procrustes) : r.mpjpe;
  r.per_joint = per_joint_errors(pred.points, gt.points, in.mode);
  if (pred.pixels && gt.pixels) r.landmark_error = landmark_error(*pred.pixels, *gt.pixels);
  if (!in.pred_colors_path.empty() || !in.gt_colors_path.empty()) {
    require(!in.pred_colors_path.empty() && !in.gt_colors_path.empty(), ErrorKind::InvalidArgument,
            "photometric error needs both color files");
    r.photometric_error = photometric_error(parse_points(read_text_file(in.pred_colors_path), in.pred_colors_path),
                                            parse_points(read_text_file(in.gt_colors_path), in.gt_colors_path));
  }
  return r;
}

inline std::string format_metric_report(const MetricReport& r) { return detail::to_json(r).dump(2) + "\n"; }

}  // namespace kinebody
