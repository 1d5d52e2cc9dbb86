#include "xalign/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "xalign/errors.hpp"

namespace xalign {

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

double Intrinsics::diagonal() const { return std::hypot(width, height); }

void Intrinsics::validate() const {
  const bool finite = std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy) &&
                      std::isfinite(width) && std::isfinite(height);
  if (!finite || !(fx > 0.0) || !(fy > 0.0)) throw InvalidConfig("intrinsics: focal lengths must be positive");
  if (cx < 0.0 || cx > width || cy < 0.0 || cy > height)
    throw InvalidConfig("intrinsics: principal point outside the image");
}

Vec2 Intrinsics::normalize(const Vec2& pixel) const { return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy}; }

ProjectionMatrix::ProjectionMatrix(const Intrinsics& k, const Extrinsics& m) {
  Mat34 rt;
  rt.leftCols<3>() = m.rotation;
  rt.col(3) = m.translation;
  p_ = k.matrix() * rt;
}

double ProjectionMatrix::depth(const Vec3& point) const {
  const double w = p_.row(2).head<3>().dot(point) + p_(2, 3);
  return w / p_.row(2).head<3>().norm();
}

std::optional<Vec2> ProjectionMatrix::try_project(const Vec3& point) const {
  if (!(depth(point) > kMinDepth)) return std::nullopt;
  const Eigen::Vector3d h = p_.leftCols<3>() * point + p_.col(3);
  return Vec2(h.x() / h.z(), h.y() / h.z());
}

Vec2 ProjectionMatrix::project(const Vec3& point) const {
  auto pixel = try_project(point);
  if (!pixel) throw NonPositiveDepth();
  return *pixel;
}

std::vector<Vec2> project(const ProjectionMatrix& p, std::span<const Vec3> points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(p.project(x));
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_from_vector(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-12) return Mat3::Identity() + skew(axis_angle);
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Vec3 rotation_to_vector(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Mat3 rotation_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rotation_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rotation_z(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(); }

Mat3 nearest_rotation(const Mat3& m) {
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Eigen::Vector4d rotation_to_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Eigen::Vector4d wxyz(q.w(), q.x(), q.y(), q.z());
  if (wxyz[0] < 0.0) wxyz = -wxyz;
  return wxyz;
}

Mat3 quaternion_to_rotation(const Eigen::Vector4d& wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  q.normalize();
  return q.toRotationMatrix();
}

bool is_rotation(const Mat3& r, double tolerance) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance) return false;
  return std::abs(r.determinant() - 1.0) <= tolerance;
}

double geodesic_rotation_error(const Mat3& a, const Mat3& b) {
  // atan2 form of arccos((tr(A^T B) - 1) / 2); accurate near 0 and pi.
  const Mat3 rel = a.transpose() * b;
  const double c = 0.5 * (rel.trace() - 1.0);
  const Vec3 axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double s = 0.5 * axis.norm();
  return std::clamp(std::atan2(s, c), 0.0, M_PI);
}

bool BodyPose::is_valid(double tolerance) const {
  return std::all_of(rotations.begin(), rotations.end(), [&](const Mat3& r) { return is_rotation(r, tolerance); });
}

Joints3 forward_kinematics(const CanonicalSkeleton& skeleton, const BodyPose& pose, const Vec3& root_position) {
  const auto& parents = skeleton.parents();
  const auto& offsets = skeleton.offsets();
  std::array<Mat3, kJointCount> global;
  Joints3 joints;
  global[0] = pose.rotations[0];
  joints[0] = root_position;
  for (std::size_t i = 1; i < kJointCount; ++i) {
    const auto p = static_cast<std::size_t>(parents[i]);
    joints[i] = joints[p] + global[p] * offsets[i];
    global[i] = global[p] * pose.rotations[i];
  }
  return joints;
}

}  // namespace xalign
