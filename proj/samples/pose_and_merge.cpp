// Poses a synthetic body, shades a random face, merges the two and writes
// the result as an OBJ file.
//
//   pose_and_merge [seed] [out.obj]

#include "kinebody/kinebody.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace kb = kinebody;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const std::string out = argc > 2 ? argv[2] : "merged.obj";
  try {
    const auto assets = kb::generate_synthetic_rig(seed, 2000, 300);
    kb::Rng rng = kb::Rng(seed).split("sample_pose");

    std::vector<kb::Vec3> aa(kb::kTotalJoints, kb::Vec3::Zero());
    for (int j = 1; j < kb::kTotalJoints; ++j) aa[j] = 0.3 * kb::Vec3(rng.normal(), rng.normal(), rng.normal());
    const auto body = kb::pose_body(assets.rig, kb::ShapeParams{}, kb::Pose::from_axis_angle(aa));

    kb::FaceParams fp;
    for (auto& v : {&fp.zeta, &fp.epsilon, &fp.gamma})
      for (Eigen::Index k = 0; k < v->size(); ++k) (*v)[k] = 0.3 * rng.normal();
    fp.mu.col(0).setConstant(1.5);
    const auto face = kb::shade_face(assets.face, fp);

    const auto merged = kb::merge_face_body(body, assets.rig, face.vertices, assets.face, assets.merge,
                                            kb::head_rotation(body, assets.merge));
    std::vector<kb::Triangle> tris = merged.stitch_triangles;
    for (const auto& t : assets.face.triangles)
      tris.push_back({t[0] + merged.face_offset, t[1] + merged.face_offset, t[2] + merged.face_offset});
    std::ofstream(out) << kb::format_obj(merged.vertices, tris, nullptr);
    std::cout << "wrote " << merged.vertices.rows() << " vertices and " << tris.size() << " triangles to " << out
              << '\n';
  } catch (const kb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_numerical() ? 3 : 2;
  }
  return 0;
}
