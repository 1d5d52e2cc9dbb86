#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "xalign/assignment.hpp"
#include "xalign/geometry.hpp"
#include "xalign/matching.hpp"

namespace xalign {

inline constexpr double kSimulatorFrameRate = 10.0;  // Hz
inline constexpr double kMaxPersonSpeed = 3.0;       // m/s
inline constexpr double kPelvisHeight = 0.95;        // m

struct SceneConfig {
  std::size_t person_count = 4;
  std::size_t frames = 32;
  std::size_t camera_count = 1;
  double pixel_noise_sigma = 0.0;    // px
  double joint3d_noise_sigma = 0.0;  // m
  double dropout_rate = 0.0;         // per 2D joint, [0, 1)
  double fov_degrees = 60.0;         // horizontal
  double image_width = 1920.0;
  double image_height = 1080.0;
  bool moving_cameras = true;
  // Per-joint rotation noise (degrees, each axis) on every sensor's body-pose estimate.
  double pose_noise_deg = 0.0;
  // Persons in the same group share their non-root body poses.
  std::vector<std::vector<std::size_t>> synchronized_pose_groups;
  // Constant per-joint rotation offset (degrees, each axis) of every group member but the first.
  double sync_deviation_deg = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  Intrinsics intrinsics() const;

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

struct SceneTruth {
  // [person][frame]
  std::vector<std::vector<Joints3>> joints;
  std::vector<std::vector<BodyPose>> poses;
  // [camera][frame]
  std::vector<std::vector<Extrinsics>> extrinsics;
  // [camera][person]: index of the person in that camera's 2D track list.
  std::vector<std::vector<std::size_t>> index2d;
  // [camera][person][frame]: at least 6 joints in front of the camera and inside the image.
  std::vector<std::vector<std::vector<bool>>> visible;

  std::size_t person_count() const { return joints.size(); }
  std::size_t frame_count() const { return joints.empty() ? 0 : joints.front().size(); }
  std::size_t camera_count() const { return extrinsics.size(); }

  // Pairs of persons visible in at least one frame.
  std::vector<MatchPair> visible_pairs(std::size_t camera) const;
  std::vector<MatchPair> visible_pairs(std::size_t camera, std::size_t frame) const;
};

struct Scene {
  SceneConfig config;
  Intrinsics intrinsics;
  SceneTruth truth;
  std::vector<PersonTrack3D> tracks3d;
  std::vector<std::vector<PersonTrack2D>> tracks2d;  // [camera]
};

// Throws InvalidConfig.
Scene generate(const SceneConfig& config, const CanonicalSkeleton& skeleton = CanonicalSkeleton::builtin());

// Fraction of truth's visible pairs present in result. 1 when nothing is visible.
double accuracy(const MatchSet& result, const SceneTruth& truth, std::size_t camera);
double accuracy(const MatchSet& result, const SceneTruth& truth, std::size_t camera, std::size_t frame);

}  // namespace xalign
