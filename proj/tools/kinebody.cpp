// kinebody command-line tool. Exit codes: 0 success, 2 invalid input,
// 3 numerical failure.

#include "kinebody/kinebody.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace kb = kinebody;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

void apply_thread_cap() {
  const char* env = std::getenv("KINEBODY_THREADS");
  if (!env || !*env) return;
  const double n = kb::parse_double(env, "KINEBODY_THREADS");
  kb::require(n >= 1.0 && n == std::floor(n) && n <= 4096, kb::ErrorKind::InvalidArgument,
              "KINEBODY_THREADS must be a positive integer");
  Eigen::setNbThreads(static_cast<int>(n));
}

std::vector<double> parse_csv(const std::string& s, std::size_t count, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(kb::parse_double(tok, what));
  kb::require(out.size() == count, kb::ErrorKind::Parse,
              what + ": expected " + std::to_string(count) + " comma-separated values");
  return out;
}

std::string format_pose_text(const kb::IkPrediction& p) {
  std::ostringstream os;
  os << "# per-joint axis-angle, then beta and alpha\n";
  for (const auto& r : p.rotations) {
    const kb::Vec3 aa = kb::matrix_to_axis_angle(r);
    os << kb::format_double(aa.x()) << ' ' << kb::format_double(aa.y()) << ' ' << kb::format_double(aa.z()) << '\n';
  }
  os << "beta";
  for (Eigen::Index m = 0; m < p.beta.size(); ++m) os << ' ' << kb::format_double(p.beta[m]);
  os << "\nalpha " << kb::format_double(p.alpha) << '\n';
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinebody: synthetic whole-body capture toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic body rig, face asset and merge spec");
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  int synth_nb = 2000, synth_nf = 300;
  synth->add_option("--seed", synth_seed, "Random seed")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--body-vertices", synth_nb, "Body vertex count")->capture_default_str();
  synth->add_option("--face-vertices", synth_nf, "Face vertex count")->capture_default_str();

  // fk
  auto* fk = app.add_subcommand("fk", "Pose a rig with per-joint axis-angle rotations");
  std::string fk_rig, fk_pose, fk_out, fk_shape;
  fk->add_option("--rig", fk_rig, "Body rig (KBA1)")->required();
  fk->add_option("--pose", fk_pose, "Pose text: one axis-angle triple per joint, optional 'translation x y z'")
      ->required();
  fk->add_option("--shape", fk_shape, "Optional text file with up to 16 shape coefficients");
  fk->add_option("--out", fk_out, "Output text: 'v x y z' per vertex, then 'j x y z' per joint")->required();

  // face
  auto* face = app.add_subcommand("face", "Shade a face asset and write a colored mesh");
  std::string face_asset, face_params, face_out;
  face->add_option("--asset", face_asset, "Face asset (KBA1)")->required();
  face->add_option("--params", face_params, "Parameter text: zeta/epsilon/gamma/mu lines")->required();
  face->add_option("--out", face_out, "Output mesh (OBJ with per-vertex color)")->required();

  // decode
  auto* decode = app.add_subcommand("decode", "Decode keypoints from a map stack");
  std::string dec_maps, dec_out;
  decode->add_option("--maps", dec_maps, "Map stack (KBA1, kind map_stack)")->required();
  decode->add_option("--out", dec_out, "Keypoint text: 'id u v x y z conf' per joint")->required();

  // train-ik
  auto* train = app.add_subcommand("train-ik", "Train an IK network on FK-generated samples");
  std::string tr_rig, tr_out, tr_part = "body", tr_log, tr_hidden, tr_opt = "momentum";
  int tr_n = 20000;
  std::uint64_t tr_seed = 0;
  kb::IKTrainConfig tr_cfg;
  train->add_option("--rig", tr_rig, "Body rig (KBA1)")->required();
  train->add_option("--n", tr_n, "Training samples")->capture_default_str();
  train->add_option("--seed", tr_seed, "Random seed")->capture_default_str();
  train->add_option("--out", tr_out, "Output parameters (KBA1)")->required();
  train->add_option("--part", tr_part, "body | left_hand | right_hand")->capture_default_str();
  train->add_option("--epochs", tr_cfg.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch", tr_cfg.batch_size, "Batch size")->capture_default_str();
  train->add_option("--lr", tr_cfg.learning_rate, "Initial learning rate")->capture_default_str();
  train->add_option("--optimizer", tr_opt, "momentum | adam")->capture_default_str();
  train->add_option("--hidden", tr_hidden, "Hidden widths, comma separated (default 6x1024 body, 6x512 hands)");
  train->add_option("--noise", tr_cfg.noise_stddev, "Input noise stddev (m)")->capture_default_str();
  train->add_option("--clip", tr_cfg.max_grad_norm, "Gradient norm clip, 0 disables")->capture_default_str();
  train->add_option("--log", tr_log, "Write the per-epoch training log here");

  // ik
  auto* ik = app.add_subcommand("ik", "Run a trained IK network on keypoints");
  std::string ik_params, ik_kp, ik_out;
  ik->add_option("--params", ik_params, "Network parameters (KBA1)")->required();
  ik->add_option("--keypoints", ik_kp, "Keypoints: 'x y z' or 'id u v x y z conf' rows")->required();
  ik->add_option("--out", ik_out, "Output pose text")->required();

  // solve-translation
  auto* st = app.add_subcommand("solve-translation", "Recover the parent depth and root translation from one bone");
  std::string st_cam, st_parent, st_child, st_rel = "0,0,0";
  double st_dp = 0, st_dc = 0, st_len = 0;
  st->add_option("--camera", st_cam, "fx,fy,cx,cy[,skew]")->required();
  st->add_option("--parent", st_parent, "Parent pixel u,v")->required();
  st->add_option("--child", st_child, "Child pixel u,v")->required();
  st->add_option("--parent-depth", st_dp, "Root-relative parent depth (m)")->required();
  st->add_option("--child-depth", st_dc, "Root-relative child depth (m)")->required();
  st->add_option("--length", st_len, "Bone length (m)")->required();
  st->add_option("--parent-relative", st_rel, "Root-relative parent position x,y,z")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Compare predicted keypoints (and colors) with ground truth");
  kb::EvalInputs ev_in;
  std::string ev_mode = "root", ev_report;
  ev->add_option("--pred", ev_in.pred_path, "Predicted keypoints")->required();
  ev->add_option("--gt", ev_in.gt_path, "Ground-truth keypoints")->required();
  ev->add_option("--mode", ev_mode, "root | pa")->capture_default_str();
  ev->add_option("--pred-colors", ev_in.pred_colors_path, "Predicted per-vertex colors 'r g b'");
  ev->add_option("--gt-colors", ev_in.gt_colors_path, "Ground-truth per-vertex colors 'r g b'");
  ev->add_option("--report", ev_report, "Write the report here (stdout otherwise)");

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Run the synthetic end-to-end pipeline");
  std::string pl_config, pl_out;
  std::uint64_t pl_seed = 0;
  pl->add_option("--seed", pl_seed, "Random seed (overrides the config file)");
  pl->add_option("--config", pl_config, "Key-value config file");
  pl->add_option("--out", pl_out, "Output directory (overrides the config file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    apply_thread_cap();

    if (*synth) {
      const auto a = kb::generate_synthetic_rig(synth_seed, synth_nb, synth_nf);
      std::filesystem::create_directories(synth_out);
      const std::filesystem::path dir(synth_out);
      kb::save_asset((dir / "body_rig.kba").string(), a.rig);
      kb::save_asset((dir / "face_asset.kba").string(), a.face);
      kb::save_asset((dir / "merge_spec.kba").string(), a.merge);
      std::cout << "wrote body_rig.kba, face_asset.kba, merge_spec.kba to " << synth_out << '\n';
    } else if (*fk) {
      const auto rig = kb::load_body_rig(fk_rig);
      const auto pt = kb::parse_pose_text(kb::read_text_file(fk_pose), fk_pose);
      kb::require_dims(pt.axis_angles.size(), static_cast<std::size_t>(rig.num_joints()), fk_pose + ": joint count");
      kb::ShapeParams shape;
      if (!fk_shape.empty()) {
        std::vector<double> vals;
        for (const auto& row : kb::tokenize_rows(kb::read_text_file(fk_shape)))
          for (const auto& t : row.tokens) vals.push_back(kb::parse_double(t, kb::line_label(fk_shape, row.line)));
        kb::require(vals.size() <= kb::kShapeDims, kb::ErrorKind::Parse, fk_shape + ": more than 16 coefficients");
        for (std::size_t m = 0; m < vals.size(); ++m) shape.beta[static_cast<Eigen::Index>(m)] = vals[m];
      }
      const auto posed = kb::pose_body(rig, shape, kb::Pose::from_axis_angle(pt.axis_angles, pt.translation));
      std::ostringstream os;
      for (Eigen::Index i = 0; i < posed.vertices.rows(); ++i)
        os << "v " << kb::format_double(posed.vertices(i, 0)) << ' ' << kb::format_double(posed.vertices(i, 1)) << ' '
           << kb::format_double(posed.vertices(i, 2)) << '\n';
      for (Eigen::Index j = 0; j < posed.joint_positions.rows(); ++j)
        os << "j " << kb::format_double(posed.joint_positions(j, 0)) << ' '
           << kb::format_double(posed.joint_positions(j, 1)) << ' ' << kb::format_double(posed.joint_positions(j, 2))
           << '\n';
      kb::write_text_file(fk_out, os.str());
    } else if (*face) {
      const auto asset = kb::load_face_asset(face_asset);
      const auto params = kb::parse_face_params(kb::read_text_file(face_params), face_params);
      const auto shaded = kb::shade_face(asset, params);
      const kb::MatX3 colors = shaded.radiosity.cwiseMax(0.0).cwiseMin(1.0);
      kb::write_text_file(face_out, kb::format_obj(shaded.vertices, asset.triangles, &colors));
    } else if (*decode) {
      const auto maps = kb::map_stack_from_kba(kb::read_kba(dec_maps));
      kb::write_text_file(dec_out, kb::format_keypoints(kb::decode_keypoints(maps)));
    } else if (*train) {
      const auto rig = kb::load_body_rig(tr_rig);
      const auto kind = kb::parse_part_kind(tr_part);
      const auto kin = kb::IkKinematics::build(rig, kb::make_ik_part(rig, kind));
      tr_cfg.seed = tr_seed;
      if (tr_opt == "adam") tr_cfg.optimizer = kb::Optimizer::Adam;
      else if (tr_opt != "momentum") throw kb::Error(kb::ErrorKind::InvalidArgument, "optimizer must be momentum or adam");
      tr_cfg.hidden = !tr_hidden.empty() ? kb::parse_int_list(tr_hidden, "--hidden")
                                         : std::vector<int>(6, kind == kb::PartKind::Body ? 1024 : 512);
      const auto data = kb::generate_ik_training_set(kin, tr_n, kb::Rng(tr_seed).split("ik_data").next_u64(), tr_cfg);
      const auto result = kb::train_iknet(kin, data, tr_cfg);
      kb::write_kba(tr_out, kb::to_kba(result.params));
      if (!tr_log.empty()) kb::write_text_file(tr_log, kb::format_training_log(result.log));
      if (!result.log.empty()) std::cout << "final mean loss " << result.log.back().mean_loss << '\n';
    } else if (*ik) {
      const auto params = kb::iknet_from_kba(kb::read_kba(ik_params));
      auto kp = kb::parse_keypoint_text(kb::read_text_file(ik_kp), ik_kp).points;
      kb::require(kp.rows() == params.part_joints, kb::ErrorKind::DimensionMismatch,
                  ik_kp + ": expected " + std::to_string(params.part_joints) + " keypoints, got " +
                      std::to_string(kp.rows()));
      kp = kp.rowwise() - kp.row(0);
      kb::write_text_file(ik_out, format_pose_text(kb::iknet_forward(params, kp)));
    } else if (*st) {
      const auto c = parse_csv(st_cam, std::count(st_cam.begin(), st_cam.end(), ',') == 4 ? 5 : 4, "--camera");
      const auto p = parse_csv(st_parent, 2, "--parent");
      const auto ch = parse_csv(st_child, 2, "--child");
      const auto rel = parse_csv(st_rel, 3, "--parent-relative");
      kb::TranslationProblem tp;
      tp.camera = kb::Camera::from_params(c[0], c[1], c[2], c[3], c.size() == 5 ? c[4] : 0.0);
      tp.parent_2d = {p[0], p[1]};
      tp.child_2d = {ch[0], ch[1]};
      tp.parent_depth = st_dp;
      tp.child_depth = st_dc;
      tp.bone_length = st_len;
      tp.parent_relative = {rel[0], rel[1], rel[2]};
      const auto s = kb::solve_global_translation(tp);
      std::cout << "roots";
      for (double r : s.roots) std::cout << ' ' << kb::format_double(r);
      std::cout << "\nadmissible";
      for (double r : s.admissible) std::cout << ' ' << kb::format_double(r);
      std::cout << "\ndepth " << kb::format_double(s.depth) << "\ntranslation " << kb::format_double(s.translation.x())
                << ' ' << kb::format_double(s.translation.y()) << ' ' << kb::format_double(s.translation.z()) << '\n';
    } else if (*ev) {
      if (ev_mode == "pa") ev_in.mode = kb::MpjpeMode::Procrustes;
      else if (ev_mode != "root") throw kb::Error(kb::ErrorKind::InvalidArgument, "--mode must be root or pa");
      const auto report = kb::evaluate_files(ev_in);
      const std::string text = kb::format_metric_report(report);
      if (ev_report.empty()) std::cout << text;
      else kb::write_text_file(ev_report, text);
      std::cerr << std::fixed << std::setprecision(1) << "MPJPE " << report.mpjpe << " mm, PA-MPJPE " << report.mpjpe_pa
                << " mm\n";
    } else if (*pl) {
      kb::PipelineConfig cfg;
      if (!pl_config.empty()) cfg = kb::load_pipeline_config(pl_config);
      if (pl->count("--seed")) cfg.seed = pl_seed;
      if (!pl_out.empty()) cfg.output_dir = pl_out;
      const auto result = kb::run_synthetic_pipeline(cfg);
      if (cfg.output_dir.empty()) std::cout << result.report_text;
      const auto& s = result.report["summary"];
      std::cerr << std::fixed << std::setprecision(1) << "decode MPJPE " << s["decode_mpjpe_mm"].get<double>()
                << " mm, IK MPJPE " << s["ik_mpjpe_mm"].get<double>() << " mm, IK PA-MPJPE "
                << s["ik_mpjpe_pa_mm"].get<double>() << " mm\n"
                << std::scientific << "max translation error " << s["translation_error_max_m"].get<double>() << " m\n";
    }
  } catch (const kb::Error& e) {
    std::cerr << "error (" << kb::to_string(e.kind()) << "): " << e.what() << '\n';
    return e.is_numerical() ? kExitNumerical : kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return 0;
}
