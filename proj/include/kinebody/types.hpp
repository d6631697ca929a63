#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinebody {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
/// N x 3 point set, one point per row.
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatX2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

inline constexpr int kNoParent = -1;

inline constexpr int kBodyJoints = 22;
inline constexpr int kHandJointsPerSide = 15;
inline constexpr int kHandJoints = 2 * kHandJointsPerSide;
inline constexpr int kTotalJoints = kBodyJoints + kHandJoints;

inline constexpr int kShapeDims = 16;
inline constexpr int kFaceShapeDims = 80;
inline constexpr int kFaceExpressionDims = 64;
inline constexpr int kFaceAlbedoDims = 80;
inline constexpr int kShBands = 9;

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  InvariantViolation,
  InvalidHierarchy,
  SchemaMismatch,
  Io,
  Parse,
  NoDetection,
  Infeasible,
  Degenerate,
  Numerical,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::InvalidHierarchy: return "invalid-hierarchy";
    case ErrorKind::SchemaMismatch: return "schema-mismatch";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::NoDetection: return "no-detection";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

/// Library error carrying a machine-readable kind next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures of the numerics rather than of the input.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::Numerical || kind_ == ErrorKind::Infeasible ||
           kind_ == ErrorKind::Degenerate;
  }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

inline void require_dims(std::size_t got, std::size_t want, const std::string& what) {
  if (got != want) {
    throw Error(ErrorKind::DimensionMismatch,
                what + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

/// Rotation followed by translation: x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  RigidTransform inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
};

}  // namespace kinebody
