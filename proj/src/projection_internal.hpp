#pragma once

// Per-joint projection shared by the cost functions and OptMatch so both paths
// produce bit-identical costs.

#include <array>

#include "xalign/geometry.hpp"

namespace xalign::detail {

struct ProjectedJoints {
  std::array<Vec2, kJointCount> pixel;
  std::array<bool, kJointCount> in_front{};
};

inline ProjectedJoints project_joints(const Joints3& joints, const Extrinsics& m, const Intrinsics& k) {
  ProjectedJoints out;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const Vec3 c = m.to_camera(joints[j]);
    out.in_front[j] = c.z() > kMinDepth;
    if (out.in_front[j]) out.pixel[j] = Vec2(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
  }
  return out;
}

inline double weighted_distance(const ProjectedJoints& projected, const Joints2& observed,
                                const JointWeights& confidence, double penalty) {
  double weight_sum = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const double w = confidence[j];
    if (!(w > 0.0)) continue;
    weight_sum += w;
    acc += w * (projected.in_front[j] ? (projected.pixel[j] - observed[j]).norm() : penalty);
  }
  return weight_sum > 0.0 ? acc / weight_sum : penalty;
}

inline double mean_distance(const ProjectedJoints& a, const ProjectedJoints& b, double penalty) {
  double acc = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j)
    acc += (a.in_front[j] && b.in_front[j]) ? (a.pixel[j] - b.pixel[j]).norm() : penalty;
  return acc / static_cast<double>(kJointCount);
}

// pose2d re-rooted with pose3d's global orientation.
inline BodyPose with_root_of(const BodyPose& pose2d, const BodyPose& pose3d) {
  BodyPose out = pose2d;
  out.rotations[0] = pose3d.rotations[0];
  return out;
}

}  // namespace xalign::detail
