#pragma once

// Body rig, face asset and merge description, their KBA1 serialization, and
// a deterministic synthetic generator standing in for licensed assets.
//
// Synthetic skeleton ordering (J = 52):
//    0 pelvis        1 l_hip        2 r_hip        3 spine1
//    4 l_knee        5 r_knee       6 spine2       7 l_ankle
//    8 r_ankle       9 spine3      10 l_foot      11 r_foot
//   12 neck         13 l_collar    14 r_collar    15 head (upper neck)
//   16 l_shoulder   17 r_shoulder  18 l_elbow     19 r_elbow
//   20 l_wrist      21 r_wrist
//   22..36 left hand, 37..51 right hand: five fingers (thumb, index,
//   middle, ring, pinky) of three joints each, finger f joint k at
//   22 + 15*side + 3*f + k, k = 0 attached to the wrist.
// Coordinates: meters, +y up, +x toward the character's left, +z forward.

#include "kinebody/kba.hpp"
#include "kinebody/mesh.hpp"
#include "kinebody/rng.hpp"
#include "kinebody/rotation.hpp"
#include "kinebody/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace kinebody {

struct BodyRig {
  MatX3 mean_vertices;                // N_B x 3
  std::vector<MatX3> shape_basis;     // 16 of N_B x 3
  MatX skinning_weights;              // N_B x J
  std::vector<int> parent_index;      // J, root = kNoParent
  MatX3 rest_joint_positions;         // J x 3
  std::vector<int> basic_keypoint_ids;
  std::vector<int> extended_keypoint_ids;

  int num_vertices() const { return static_cast<int>(mean_vertices.rows()); }
  int num_joints() const { return static_cast<int>(parent_index.size()); }
  int root() const {
    for (int j = 0; j < num_joints(); ++j)
      if (parent_index[j] == kNoParent) return j;
    return kNoParent;
  }
};

struct FaceAsset {
  MatX3 mean_face;                       // N_F x 3
  std::vector<MatX3> shape_basis;        // 80 of N_F x 3
  std::vector<MatX3> expression_basis;   // 64 of N_F x 3
  MatX3 mean_reflectance;                // N_F x 3, values in [0, 1]
  std::vector<MatX3> reflectance_basis;  // 80 of N_F x 3
  std::vector<Triangle> triangles;
  std::vector<int> boundary_loop;
  std::vector<int> landmark_ids;

  int num_vertices() const { return static_cast<int>(mean_face.rows()); }
};

/// Placement of the face asset on the body. Face points map to
/// scale * rotation * p + translation in the rest-pose body frame.
struct MergeSpec {
  std::vector<int> body_boundary_loop;
  std::vector<int> face_region;  // body vertices replaced by the face
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
  int neck_joint_id = 15;

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// ---------------------------------------------------------------------------
// Validation. Violations are rejected with the offending field named.

namespace detail {

inline void check_stack(const std::vector<MatX3>& stack, std::size_t count, Eigen::Index rows,
                        const std::string& field) {
  require_dims(stack.size(), count, field + " component count");
  for (std::size_t k = 0; k < stack.size(); ++k)
    if (stack[k].rows() != rows)
      throw Error(ErrorKind::DimensionMismatch,
                  field + "[" + std::to_string(k) + "] has " + std::to_string(stack[k].rows()) +
                      " rows, expected " + std::to_string(rows));
}

inline void check_finite(const MatX3& m, const std::string& field) {
  if (!m.allFinite()) throw Error(ErrorKind::InvariantViolation, field + " contains non-finite values");
}

}  // namespace detail

inline void validate_hierarchy(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  int roots = 0;
  for (int j = 0; j < n; ++j) {
    if (parent[j] == kNoParent) {
      ++roots;
      continue;
    }
    if (parent[j] < 0 || parent[j] >= n || parent[j] == j)
      throw Error(ErrorKind::InvalidHierarchy, "parent_index[" + std::to_string(j) + "] is out of range");
  }
  if (roots != 1)
    throw Error(ErrorKind::InvalidHierarchy, "parent_index must have exactly one root, found " + std::to_string(roots));
  for (int j = 0; j < n; ++j) {
    int cur = j;
    for (int steps = 0; cur != kNoParent; ++steps) {
      if (steps > n) throw Error(ErrorKind::InvalidHierarchy, "parent_index has a cycle through joint " + std::to_string(j));
      cur = parent[cur];
    }
  }
}

/// True when every joint's parent precedes it, which lets FK run in index order.
inline bool is_topologically_ordered(const std::vector<int>& parent) {
  for (std::size_t j = 0; j < parent.size(); ++j)
    if (parent[j] != kNoParent && parent[j] >= static_cast<int>(j)) return false;
  return true;
}

inline void validate(const BodyRig& rig) {
  const Eigen::Index nv = rig.mean_vertices.rows();
  const int nj = rig.num_joints();
  require(nv > 0, ErrorKind::DimensionMismatch, "mean_vertices is empty");
  detail::check_finite(rig.mean_vertices, "mean_vertices");
  detail::check_stack(rig.shape_basis, kShapeDims, nv, "shape_basis");
  require(rig.skinning_weights.rows() == nv && rig.skinning_weights.cols() == nj, ErrorKind::DimensionMismatch,
          "skinning_weights must be N_B x J (" + std::to_string(nv) + " x " + std::to_string(nj) + ")");
  require(rig.rest_joint_positions.rows() == nj, ErrorKind::DimensionMismatch,
          "rest_joint_positions must have J rows");
  detail::check_finite(rig.rest_joint_positions, "rest_joint_positions");
  validate_hierarchy(rig.parent_index);
  require(is_topologically_ordered(rig.parent_index), ErrorKind::InvalidHierarchy,
          "parent_index must list parents before children");
  for (Eigen::Index i = 0; i < nv; ++i) {
    const auto row = rig.skinning_weights.row(i);
    if (!row.allFinite() || row.minCoeff() < 0.0)
      throw Error(ErrorKind::InvariantViolation, "skinning_weights row " + std::to_string(i) + " has negative entries");
    if (std::abs(row.sum() - 1.0) > 1e-6)
      throw Error(ErrorKind::InvariantViolation, "skinning_weights row " + std::to_string(i) + " sums to " +
                                                     std::to_string(row.sum()) + ", expected 1");
  }
  std::set<int> seen;
  for (int id : rig.basic_keypoint_ids) {
    require(id >= 0 && id < nj, ErrorKind::InvariantViolation, "basic_keypoint_ids entry out of range");
    require(seen.insert(id).second, ErrorKind::InvariantViolation, "basic_keypoint_ids has duplicates");
  }
  for (int id : rig.extended_keypoint_ids) {
    require(id >= 0 && id < nj, ErrorKind::InvariantViolation, "extended_keypoint_ids entry out of range");
    require(seen.insert(id).second, ErrorKind::InvariantViolation,
            "extended_keypoint_ids overlaps basic_keypoint_ids (id " + std::to_string(id) + ")");
  }
}

inline void validate(const FaceAsset& face) {
  const Eigen::Index nv = face.mean_face.rows();
  require(nv > 0, ErrorKind::DimensionMismatch, "mean_face is empty");
  detail::check_finite(face.mean_face, "mean_face");
  detail::check_stack(face.shape_basis, kFaceShapeDims, nv, "shape_basis");
  detail::check_stack(face.expression_basis, kFaceExpressionDims, nv, "expression_basis");
  detail::check_stack(face.reflectance_basis, kFaceAlbedoDims, nv, "reflectance_basis");
  require(face.mean_reflectance.rows() == nv, ErrorKind::DimensionMismatch, "mean_reflectance must be N_F x 3");
  if (!face.mean_reflectance.allFinite() || face.mean_reflectance.minCoeff() < 0.0 ||
      face.mean_reflectance.maxCoeff() > 1.0)
    throw Error(ErrorKind::InvariantViolation, "mean_reflectance must lie in [0, 1]");
  for (std::size_t t = 0; t < face.triangles.size(); ++t)
    for (int v : face.triangles[t])
      require(v >= 0 && v < nv, ErrorKind::InvariantViolation,
              "triangles[" + std::to_string(t) + "] references vertex out of range");
  for (int v : face.boundary_loop)
    require(v >= 0 && v < nv, ErrorKind::InvariantViolation, "boundary_loop index out of range");
  require(std::set<int>(face.boundary_loop.begin(), face.boundary_loop.end()).size() == face.boundary_loop.size(),
          ErrorKind::InvariantViolation, "boundary_loop repeats a vertex");
  require(is_boundary_loop(face.triangles, face.boundary_loop), ErrorKind::InvariantViolation,
          "boundary_loop is not a closed loop of boundary edges");
  for (int v : face.landmark_ids)
    require(v >= 0 && v < nv, ErrorKind::InvariantViolation, "landmark_ids index out of range");
}

inline void validate(const MergeSpec& spec, const BodyRig& rig, const FaceAsset& face) {
  require(is_rotation(spec.rotation, 1e-9), ErrorKind::InvariantViolation,
          "merge rotation must be orthonormal with determinant +1");
  require(spec.scale > 0.0 && std::isfinite(spec.scale), ErrorKind::InvariantViolation, "merge scale must be > 0");
  require(spec.translation.allFinite(), ErrorKind::InvariantViolation, "merge translation must be finite");
  require(spec.neck_joint_id >= 0 && spec.neck_joint_id < rig.num_joints(), ErrorKind::InvariantViolation,
          "neck_joint_id out of range");
  const std::set<int> region(spec.face_region.begin(), spec.face_region.end());
  for (int v : spec.face_region)
    require(v >= 0 && v < rig.num_vertices(), ErrorKind::InvariantViolation, "face_region index out of range");
  require(spec.body_boundary_loop.size() >= 3, ErrorKind::InvariantViolation, "body_boundary_loop needs >= 3 vertices");
  for (int v : spec.body_boundary_loop) {
    require(v >= 0 && v < rig.num_vertices(), ErrorKind::InvariantViolation, "body_boundary_loop index out of range");
    require(!region.count(v), ErrorKind::InvariantViolation, "body_boundary_loop vertex lies inside face_region");
  }
  require(face.boundary_loop.size() >= 3, ErrorKind::InvariantViolation, "face boundary_loop needs >= 3 vertices");
}

// ---------------------------------------------------------------------------
// Serialization.

inline KbaFile to_kba(const BodyRig& rig) {
  KbaFile f("body_rig");
  put_matrix(f, "mean_vertices", rig.mean_vertices);
  put_stack(f, "shape_basis", rig.shape_basis, static_cast<std::size_t>(rig.num_vertices()));
  put_matrix(f, "skinning_weights", MatX(rig.skinning_weights));
  put_indices(f, "parent_index", rig.parent_index);
  put_matrix(f, "rest_joint_positions", rig.rest_joint_positions);
  put_indices(f, "basic_keypoint_ids", rig.basic_keypoint_ids);
  put_indices(f, "extended_keypoint_ids", rig.extended_keypoint_ids);
  return f;
}

inline KbaFile to_kba(const FaceAsset& face) {
  KbaFile f("face_asset");
  const auto nv = static_cast<std::size_t>(face.num_vertices());
  put_matrix(f, "mean_face", face.mean_face);
  put_stack(f, "shape_basis", face.shape_basis, nv);
  put_stack(f, "expression_basis", face.expression_basis, nv);
  put_matrix(f, "mean_reflectance", face.mean_reflectance);
  put_stack(f, "reflectance_basis", face.reflectance_basis, nv);
  std::vector<std::uint32_t> tris;
  for (const auto& t : face.triangles) tris.insert(tris.end(), t.begin(), t.end());
  f.add_u32("triangles", {face.triangles.size(), 3}, std::move(tris));
  put_indices(f, "boundary_loop", face.boundary_loop);
  put_indices(f, "landmark_ids", face.landmark_ids);
  return f;
}

inline KbaFile to_kba(const MergeSpec& spec) {
  KbaFile f("merge_spec");
  put_indices(f, "body_boundary_loop", spec.body_boundary_loop);
  put_indices(f, "face_region", spec.face_region);
  put_matrix(f, "rotation", MatX(spec.rotation));
  f.add_f64("translation", {3}, {spec.translation.x(), spec.translation.y(), spec.translation.z()});
  f.add_f64("scale", {1}, {spec.scale});
  put_indices(f, "neck_joint_id", {spec.neck_joint_id});
  return f;
}

inline BodyRig body_rig_from_kba(const KbaFile& f) {
  require(f.kind() == "body_rig", ErrorKind::SchemaMismatch, "expected kind body_rig, got " + f.kind());
  BodyRig rig;
  rig.mean_vertices = get_points(f, "mean_vertices");
  rig.shape_basis = get_stack(f, "shape_basis");
  rig.skinning_weights = get_matrix(f, "skinning_weights");
  rig.parent_index = get_indices(f, "parent_index");
  rig.rest_joint_positions = get_points(f, "rest_joint_positions");
  rig.basic_keypoint_ids = get_indices(f, "basic_keypoint_ids");
  rig.extended_keypoint_ids = get_indices(f, "extended_keypoint_ids");
  validate(rig);
  return rig;
}

inline FaceAsset face_asset_from_kba(const KbaFile& f) {
  require(f.kind() == "face_asset", ErrorKind::SchemaMismatch, "expected kind face_asset, got " + f.kind());
  FaceAsset face;
  face.mean_face = get_points(f, "mean_face");
  face.shape_basis = get_stack(f, "shape_basis");
  face.expression_basis = get_stack(f, "expression_basis");
  face.mean_reflectance = get_points(f, "mean_reflectance");
  face.reflectance_basis = get_stack(f, "reflectance_basis");
  const auto& tris = f.get("triangles", DType::U32, 2);
  require(tris.dims[1] == 3, ErrorKind::DimensionMismatch, "triangles must be T x 3");
  for (std::size_t t = 0; t < tris.dims[0]; ++t)
    face.triangles.push_back({static_cast<int>(tris.u32[3 * t]), static_cast<int>(tris.u32[3 * t + 1]),
                              static_cast<int>(tris.u32[3 * t + 2])});
  face.boundary_loop = get_indices(f, "boundary_loop");
  face.landmark_ids = get_indices(f, "landmark_ids");
  validate(face);
  return face;
}

inline MergeSpec merge_spec_from_kba(const KbaFile& f) {
  require(f.kind() == "merge_spec", ErrorKind::SchemaMismatch, "expected kind merge_spec, got " + f.kind());
  MergeSpec spec;
  spec.body_boundary_loop = get_indices(f, "body_boundary_loop");
  spec.face_region = get_indices(f, "face_region");
  const MatX r = get_matrix(f, "rotation");
  require(r.rows() == 3 && r.cols() == 3, ErrorKind::DimensionMismatch, "rotation must be 3 x 3");
  spec.rotation = r;
  const auto& t = f.get("translation", DType::F64, 1);
  require(t.dims[0] == 3, ErrorKind::DimensionMismatch, "translation must have 3 entries");
  spec.translation = Vec3(t.f64[0], t.f64[1], t.f64[2]);
  spec.scale = get_scalar(f, "scale");
  const auto neck = get_indices(f, "neck_joint_id");
  require(neck.size() == 1, ErrorKind::DimensionMismatch, "neck_joint_id must hold one value");
  spec.neck_joint_id = neck[0];
  require(is_rotation(spec.rotation, 1e-9), ErrorKind::InvariantViolation, "merge rotation must be a proper rotation");
  require(spec.scale > 0.0, ErrorKind::InvariantViolation, "merge scale must be > 0");
  return spec;
}

inline void save_asset(const std::string& path, const BodyRig& rig) { write_kba(path, to_kba(rig)); }
inline void save_asset(const std::string& path, const FaceAsset& face) { write_kba(path, to_kba(face)); }
inline void save_asset(const std::string& path, const MergeSpec& spec) { write_kba(path, to_kba(spec)); }

using Asset = std::variant<BodyRig, FaceAsset, MergeSpec>;

/// Loads any asset kind; every invariant is checked and violations throw.
inline Asset load_asset(const std::string& path) {
  const KbaFile f = read_kba(path);
  if (f.kind() == "body_rig") return body_rig_from_kba(f);
  if (f.kind() == "face_asset") return face_asset_from_kba(f);
  if (f.kind() == "merge_spec") return merge_spec_from_kba(f);
  throw Error(ErrorKind::SchemaMismatch, "'" + path + "' holds unknown asset kind '" + f.kind() + "'");
}

inline BodyRig load_body_rig(const std::string& path) { return body_rig_from_kba(read_kba(path)); }
inline FaceAsset load_face_asset(const std::string& path) { return face_asset_from_kba(read_kba(path)); }
inline MergeSpec load_merge_spec(const std::string& path) { return merge_spec_from_kba(read_kba(path)); }

// ---------------------------------------------------------------------------
// Synthetic generator.

struct SyntheticAssets {
  BodyRig rig;
  FaceAsset face;
  MergeSpec merge;
};

namespace detail {

/// Random Gaussian basis with orthogonal components, each scaled so the
/// per-entry RMS equals `rms`. Components are orthogonalized in blocks of at
/// most 3N (the ambient dimension) so small meshes still get full rank blocks.
inline std::vector<MatX3> random_orthogonal_basis(Rng& rng, int count, Eigen::Index rows, double rms) {
  const Eigen::Index dim = rows * 3;
  MatX cols(dim, count);
  for (Eigen::Index c = 0; c < count; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) cols(r, c) = rng.normal();
  for (Eigen::Index start = 0; start < count; start += dim) {
    const Eigen::Index width = std::min<Eigen::Index>(dim, count - start);
    Eigen::HouseholderQR<MatX> qr(cols.middleCols(start, width));
    MatX q = qr.householderQ() * MatX::Identity(dim, width);
    cols.middleCols(start, width) = q;
  }
  std::vector<MatX3> out;
  const double norm = rms * std::sqrt(static_cast<double>(dim));
  for (Eigen::Index c = 0; c < count; ++c) {
    MatX3 m(rows, 3);
    for (Eigen::Index r = 0; r < dim; ++r) m.data()[r] = cols(r, c) * norm;
    out.push_back(std::move(m));
  }
  return out;
}

inline std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& dir) {
  const Vec3 ref = std::abs(dir.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  const Vec3 e1 = dir.cross(ref).normalized();
  return {e1, dir.cross(e1)};
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

struct SkeletonTemplate {
  std::vector<int> parent;
  MatX3 joints;
  std::vector<double> bone_radius;  // capsule radius of the bone ending at joint j
};

inline SkeletonTemplate body_skeleton_template() {
  SkeletonTemplate s;
  s.parent.assign(kTotalJoints, kNoParent);
  s.joints.resize(kTotalJoints, 3);
  s.bone_radius.assign(kTotalJoints, 0.0);
  struct B { int id, parent; double x, y, z, r; };
  const std::array<B, kBodyJoints> body = {{
      {0, kNoParent, 0.00, 0.95, 0.00, 0.00}, {1, 0, 0.09, 0.88, 0.00, 0.07},
      {2, 0, -0.09, 0.88, 0.00, 0.07},        {3, 0, 0.00, 1.05, -0.01, 0.12},
      {4, 1, 0.10, 0.50, 0.01, 0.065},        {5, 2, -0.10, 0.50, 0.01, 0.065},
      {6, 3, 0.00, 1.18, -0.01, 0.13},        {7, 4, 0.10, 0.09, -0.01, 0.045},
      {8, 5, -0.10, 0.09, -0.01, 0.045},      {9, 6, 0.00, 1.32, -0.02, 0.14},
      {10, 7, 0.11, 0.02, 0.12, 0.035},       {11, 8, -0.11, 0.02, 0.12, 0.035},
      {12, 9, 0.00, 1.50, -0.02, 0.06},       {13, 9, 0.07, 1.44, -0.02, 0.05},
      {14, 9, -0.07, 1.44, -0.02, 0.05},      {15, 12, 0.00, 1.60, 0.00, 0.05},
      {16, 13, 0.18, 1.43, -0.03, 0.055},     {17, 14, -0.18, 1.43, -0.03, 0.055},
      {18, 16, 0.45, 1.43, -0.03, 0.045},     {19, 17, -0.45, 1.43, -0.03, 0.045},
      {20, 18, 0.70, 1.43, -0.03, 0.035},     {21, 19, -0.70, 1.43, -0.03, 0.035},
  }};
  for (const auto& b : body) {
    s.parent[b.id] = b.parent;
    s.joints.row(b.id) = Vec3(b.x, b.y, b.z);
    s.bone_radius[b.id] = b.r;
  }
  // Finger base offsets from the wrist (left hand, +x outward) and phalanx lengths.
  const std::array<Vec3, 5> base = {Vec3(0.03, -0.015, 0.035), Vec3(0.09, 0.0, 0.03), Vec3(0.095, 0.0, 0.008),
                                    Vec3(0.09, 0.0, -0.013), Vec3(0.08, 0.0, -0.032)};
  const std::array<Vec3, 5> dir = {Vec3(0.6, -0.2, 0.77).normalized(), Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitX(),
                                   Vec3::UnitX()};
  const std::array<std::array<double, 3>, 5> phal = {
      {{0.035, 0.03, 0.025}, {0.04, 0.025, 0.02}, {0.045, 0.03, 0.022}, {0.042, 0.028, 0.02}, {0.032, 0.02, 0.018}}};
  for (int side = 0; side < 2; ++side) {
    const int wrist = side == 0 ? 20 : 21;
    const double mirror = side == 0 ? 1.0 : -1.0;
    for (int f = 0; f < 5; ++f) {
      Vec3 pos = s.joints.row(wrist).transpose() + Vec3(mirror * base[f].x(), base[f].y(), base[f].z());
      const Vec3 d(mirror * dir[f].x(), dir[f].y(), dir[f].z());
      for (int k = 0; k < 3; ++k) {
        const int id = kBodyJoints + kHandJointsPerSide * side + 3 * f + k;
        s.parent[id] = k == 0 ? wrist : id - 1;
        s.joints.row(id) = pos;
        s.bone_radius[id] = 0.009;
        pos += phal[f][k] * d;
      }
    }
  }
  return s;
}

/// Spherical-cap mesh: one pole vertex plus rings of growing size, joined by
/// zipper strips. Returns the ring index lists; the last ring is the boundary.
inline std::vector<std::vector<int>> cap_rings(int n_vertices) {
  const int rest = n_vertices - 1;
  int rings = std::max(2, static_cast<int>(std::lround(std::sqrt(rest / 3.0))));
  std::vector<int> sizes;
  for (;; --rings) {
    sizes.assign(rings, 0);
    const int weight = rings * (rings + 1) / 2;
    int used = 0;
    for (int i = 0; i < rings; ++i) {
      sizes[i] = rest * (i + 1) / weight;
      used += sizes[i];
    }
    for (int i = rings - 1; used < rest; i = (i + rings - 1) % rings, ++used) ++sizes[i];
    if (sizes[0] >= 3 || rings == 1) break;
  }
  std::vector<std::vector<int>> out;
  int next = 1;
  for (int size : sizes) {
    std::vector<int> ring(size);
    for (int k = 0; k < size; ++k) ring[k] = next++;
    out.push_back(std::move(ring));
  }
  return out;
}

}  // namespace detail

/// Deterministic stand-in for licensed body and face assets.
///
/// Vertices sit on capsules around each bone, skinned by inverse-distance
/// falloff (fourth power, four strongest joints, renormalized). The head
/// carries a ring of body vertices (the body boundary loop) around a frontal
/// cap (the face region) that the face asset replaces.
inline SyntheticAssets generate_synthetic_rig(std::uint64_t seed, int n_body_vertices, int n_face_vertices) {
  const int nj = kTotalJoints;
  if (n_body_vertices < 4 * nj)
    throw Error(ErrorKind::InvalidArgument, "n_body_vertices must be >= 4*J = " + std::to_string(4 * nj));
  if (n_face_vertices < 12) throw Error(ErrorKind::InvalidArgument, "n_face_vertices must be >= 12");

  const Rng root_rng(seed);
  Rng jitter = root_rng.split("joints");
  Rng verts_rng = root_rng.split("vertices");
  Rng basis_rng = root_rng.split("body_basis");
  Rng face_rng = root_rng.split("face");

  SyntheticAssets out;
  auto skel = detail::body_skeleton_template();
  for (int j = 0; j < nj; ++j)
    for (int c = 0; c < 3; ++c) skel.joints(j, c) += jitter.uniform(-0.004, 0.004);

  BodyRig& rig = out.rig;
  rig.parent_index = skel.parent;
  rig.rest_joint_positions = skel.joints;
  rig.basic_keypoint_ids = {0, 1, 2, 4, 5, 7, 8, 12, 15, 16, 17, 18, 19, 20, 21};
  rig.extended_keypoint_ids = {3, 6, 9, 10, 11, 13, 14};

  // Head sphere: boundary ring at polar angle 50 degrees around +z, face
  // region inside it. The face cap itself spans 45 degrees so the stitch
  // strip has nonzero width.
  const Vec3 head_center = skel.joints.row(15).transpose() + Vec3(0.0, 0.07, 0.0);
  const double head_radius = 0.1;
  const double ring_angle = 50.0 * std::numbers::pi / 180.0;
  const double face_angle = 45.0 * std::numbers::pi / 180.0;

  const auto face_rings = detail::cap_rings(n_face_vertices);
  const int loop_len = std::max(6, static_cast<int>(face_rings.back().size()) / 2);
  const int region_len = std::max(8, n_body_vertices / 20);
  const int bone_vertices = n_body_vertices - loop_len - region_len;

  std::vector<Vec3> positions;
  positions.reserve(n_body_vertices);

  // Bone capsules, vertex count proportional to bone length (largest remainder).
  std::vector<int> bones;
  std::vector<double> lengths;
  for (int j = 0; j < nj; ++j) {
    if (rig.parent_index[j] == kNoParent) continue;
    bones.push_back(j);
    lengths.push_back((skel.joints.row(j) - skel.joints.row(rig.parent_index[j])).norm());
  }
  const double total_len = [&] { double s = 0; for (double l : lengths) s += l; return s; }();
  const int spare = bone_vertices - static_cast<int>(bones.size());
  std::vector<int> counts(bones.size(), 1);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t b = 0; b < bones.size(); ++b) {
    const double share = spare * lengths[b] / total_len;
    counts[b] += static_cast<int>(share);
    assigned += static_cast<int>(share);
    remainders.push_back({share - std::floor(share), b});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < spare; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];

  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t b = 0; b < bones.size(); ++b) {
    const int child = bones[b];
    const Vec3 a = skel.joints.row(rig.parent_index[child]);
    const Vec3 c = skel.joints.row(child);
    const Vec3 dir = (c - a).normalized();
    const auto [e1, e2] = detail::orthonormal_frame(dir);
    const double radius = skel.bone_radius[child];
    for (int i = 0; i < counts[b]; ++i) {
      const double t = (i + 0.5) / counts[b];
      const double phi = golden * i + verts_rng.uniform(0.0, 0.3);
      const double r = radius * verts_rng.uniform(0.9, 1.1);
      positions.push_back(a + t * (c - a) + r * (std::cos(phi) * e1 + std::sin(phi) * e2));
    }
  }

  auto on_head = [&](double polar, double azimuth) {
    return Vec3(head_center + head_radius * Vec3(std::sin(polar) * std::cos(azimuth),
                                                 std::sin(polar) * std::sin(azimuth), std::cos(polar)));
  };
  MergeSpec& merge = out.merge;
  for (int k = 0; k < loop_len; ++k) {
    merge.body_boundary_loop.push_back(static_cast<int>(positions.size()));
    positions.push_back(on_head(ring_angle, 2.0 * std::numbers::pi * k / loop_len));
  }
  for (int k = 0; k < region_len; ++k) {
    merge.face_region.push_back(static_cast<int>(positions.size()));
    const double polar = ring_angle * std::sqrt((k + 0.5) / region_len);
    positions.push_back(on_head(polar, golden * k));
  }

  const Eigen::Index nv = static_cast<Eigen::Index>(positions.size());
  rig.mean_vertices.resize(nv, 3);
  for (Eigen::Index i = 0; i < nv; ++i) rig.mean_vertices.row(i) = positions[i];

  // Skinning: joint j influences along the segment from j to the mean of its children.
  std::vector<std::pair<Vec3, Vec3>> segments(nj);
  for (int j = 0; j < nj; ++j) {
    Vec3 sum = Vec3::Zero();
    int n = 0;
    for (int c = 0; c < nj; ++c)
      if (rig.parent_index[c] == j) {
        sum += skel.joints.row(c).transpose();
        ++n;
      }
    const Vec3 p = skel.joints.row(j);
    segments[j] = {p, n ? Vec3(sum / n) : p};
  }
  segments[15].second = head_center;
  rig.skinning_weights = MatX::Zero(nv, nj);
  for (Eigen::Index i = 0; i < nv; ++i) {
    const Vec3 p = rig.mean_vertices.row(i);
    std::vector<std::pair<double, int>> w;
    for (int j = 0; j < nj; ++j) {
      const double d = detail::point_segment_distance(p, segments[j].first, segments[j].second);
      w.push_back({1.0 / std::pow(d + 0.01, 4), j});
    }
    std::partial_sort(w.begin(), w.begin() + 4, w.end(), [](auto& a, auto& b) { return a.first > b.first; });
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) sum += w[k].first;
    for (int k = 0; k < 4; ++k) rig.skinning_weights(i, w[k].second) = w[k].first / sum;
  }
  rig.shape_basis = detail::random_orthogonal_basis(basis_rng, kShapeDims, nv, 0.01);

  // Face asset in face units (centimeters), cap facing +z with its sphere
  // center at the origin.
  FaceAsset& face = out.face;
  const int nf = n_face_vertices;
  const double face_radius_units = 10.0;
  face.mean_face.resize(nf, 3);
  face.mean_face.row(0) = Vec3(0, 0, face_radius_units);
  const int n_rings = static_cast<int>(face_rings.size());
  for (int r = 0; r < n_rings; ++r) {
    const double polar = face_angle * (r + 1) / n_rings;
    const auto& ring = face_rings[r];
    for (std::size_t k = 0; k < ring.size(); ++k) {
      const double az = 2.0 * std::numbers::pi * k / ring.size();
      face.mean_face.row(ring[k]) =
          face_radius_units * Vec3(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar));
    }
  }
  for (std::size_t k = 0; k < face_rings[0].size(); ++k)
    face.triangles.push_back({0, face_rings[0][k], face_rings[0][(k + 1) % face_rings[0].size()]});
  auto uniform_params = [](std::size_t n) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = static_cast<double>(k) / n;
    return p;
  };
  for (int r = 0; r + 1 < n_rings; ++r) {
    auto strip = zipper_loops(face_rings[r], uniform_params(face_rings[r].size()), face_rings[r + 1],
                              uniform_params(face_rings[r + 1].size()));
    face.triangles.insert(face.triangles.end(), strip.begin(), strip.end());
  }
  face.boundary_loop = face_rings.back();
  const auto& mid = face_rings[n_rings / 2];
  for (std::size_t k = 0; k < mid.size() && face.landmark_ids.size() < 8; k += std::max<std::size_t>(1, mid.size() / 8))
    face.landmark_ids.push_back(mid[k]);
  face.landmark_ids.push_back(0);

  face.shape_basis = detail::random_orthogonal_basis(face_rng, kFaceShapeDims, nf, 0.3);
  face.expression_basis = detail::random_orthogonal_basis(face_rng, kFaceExpressionDims, nf, 0.2);
  face.mean_reflectance.resize(nf, 3);
  const Vec3 skin(0.72, 0.52, 0.42);
  for (int i = 0; i < nf; ++i)
    for (int c = 0; c < 3; ++c) face.mean_reflectance(i, c) = std::clamp(skin[c] + face_rng.uniform(-0.05, 0.05), 0.0, 1.0);
  face.reflectance_basis = detail::random_orthogonal_basis(face_rng, kFaceAlbedoDims, nf, 0.02);

  merge.scale = head_radius / face_radius_units;
  merge.rotation = Mat3::Identity();
  merge.translation = head_center;
  merge.neck_joint_id = 15;

  validate(rig);
  validate(face);
  validate(merge, rig, face);
  return out;
}

}  // namespace kinebody
