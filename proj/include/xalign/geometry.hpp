#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace xalign {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

inline constexpr std::size_t kJointCount = 24;

using Joints3 = std::array<Vec3, kJointCount>;
using Joints2 = std::array<Vec2, kJointCount>;
using JointWeights = std::array<double, kJointCount>;

// Zero-skew pinhole intrinsics, in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;

  Mat3 matrix() const;
  double diagonal() const;
  // Throws InvalidConfig when the invariants do not hold.
  void validate() const;
  // Pixel -> normalized image plane (K^-1 applied).
  Vec2 normalize(const Vec2& pixel) const;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

// World -> camera rigid transform: x_cam = R * x_world + t.
struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 camera_center() const { return -rotation.transpose() * translation; }
  static Extrinsics identity() { return {}; }

  friend bool operator==(const Extrinsics& a, const Extrinsics& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

// P = K [R | t].
class ProjectionMatrix {
 public:
  ProjectionMatrix(const Intrinsics& k, const Extrinsics& m);
  explicit ProjectionMatrix(const Mat34& p) : p_(p) {}

  const Mat34& matrix() const { return p_; }

  // Depth of the point along the optical axis, invariant to positive scaling of P.
  double depth(const Vec3& point) const;
  std::optional<Vec2> try_project(const Vec3& point) const;
  // Throws NonPositiveDepth.
  Vec2 project(const Vec3& point) const;

 private:
  Mat34 p_;
};

inline constexpr double kMinDepth = 1e-6;

// Throws NonPositiveDepth if any point is not in front of the camera.
std::vector<Vec2> project(const ProjectionMatrix& p, std::span<const Vec3> points);

// --- rotations -------------------------------------------------------------

Mat3 rotation_from_vector(const Vec3& axis_angle);
Vec3 rotation_to_vector(const Mat3& r);
Mat3 rotation_x(double angle);
Mat3 rotation_y(double angle);
Mat3 rotation_z(double angle);
Mat3 skew(const Vec3& v);
// Projects an arbitrary 3x3 matrix onto SO(3) (closest in Frobenius norm).
Mat3 nearest_rotation(const Mat3& m);
// Unit quaternion with non-negative w, as (w, x, y, z).
Eigen::Vector4d rotation_to_quaternion(const Mat3& r);
Mat3 quaternion_to_rotation(const Eigen::Vector4d& wxyz);
bool is_rotation(const Mat3& r, double tolerance = 1e-9);

// Angle of R_a^T R_b in [0, pi].
double geodesic_rotation_error(const Mat3& a, const Mat3& b);

// --- skeleton --------------------------------------------------------------

struct BodyPose {
  // Per-joint local rotations, root first.
  std::array<Mat3, kJointCount> rotations;

  BodyPose() { rotations.fill(Mat3::Identity()); }
  static BodyPose identity() { return {}; }
  bool is_valid(double tolerance = 1e-9) const;

  friend bool operator==(const BodyPose& a, const BodyPose& b) { return a.rotations == b.rotations; }
};

class CanonicalSkeleton {
 public:
  // Parses the text format documented in docs/skeleton_format.md.
  static CanonicalSkeleton parse(std::string_view text);
  static CanonicalSkeleton load(const std::string& path);
  // The skeleton shipped in data/canonical_skeleton.txt, compiled in.
  static const CanonicalSkeleton& builtin();

  const std::array<std::string, kJointCount>& names() const { return names_; }
  const std::array<int, kJointCount>& parents() const { return parents_; }
  const Joints3& offsets() const { return offsets_; }
  // 16 hex digits, FNV-1a over the canonicalized joint table.
  const std::string& content_hash() const { return hash_; }
  int version() const { return version_; }

  // Joint positions of the rest pose with the root at the origin.
  Joints3 rest_positions() const;

 private:
  std::array<std::string, kJointCount> names_;
  std::array<int, kJointCount> parents_{};
  Joints3 offsets_;
  std::string hash_;
  int version_ = 0;
};

// Joint positions in the world frame. The root lands on root_position exactly.
Joints3 forward_kinematics(const CanonicalSkeleton& skeleton, const BodyPose& pose, const Vec3& root_position);

// --- PnP -------------------------------------------------------------------

struct PnpOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-10;
  double initial_damping = 1e-3;
};

struct PnpResult {
  Extrinsics extrinsics;
  // sqrt(mean squared per-point reprojection distance), pixels.
  double rms = 0.0;
  // Objective (sum of squared residuals, px^2) after initialization and each accepted step.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool planar = false;
};

inline constexpr std::size_t kMinPnpPoints = 6;
inline constexpr std::size_t kMinPlanarPnpPoints = 8;

// Linear initialization (DLT, or a plane homography for coplanar input)
// followed by Levenberg-Marquardt on axis-angle + translation.
// Throws InsufficientCorrespondences, DegenerateConfiguration, NoConvergence.
PnpResult solve_pnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d, const Intrinsics& k,
                    const PnpOptions& options = {});

// Damped Gauss-Newton from a given starting pose; the second half of solve_pnp.
PnpResult refine_pnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d, const Intrinsics& k,
                     const Extrinsics& initial, const PnpOptions& options = {});

// Sum of squared reprojection residuals; +inf if any point is behind the camera.
double reprojection_objective(std::span<const Vec3> points3d, std::span<const Vec2> points2d, const Intrinsics& k,
                              const Extrinsics& m);

}  // namespace xalign
