#include "xalign/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "xalign/errors.hpp"
#include "xalign/seeding.hpp"

namespace xalign {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::size_t kWaypointSpacing = 10;  // frames
constexpr double kMinWaypointStep = 0.3;      // m per waypoint
constexpr double kMaxWaypointStep = 1.2;
constexpr double kMinSeparation = 1.0;
constexpr double kCameraDistance = 11.0;
constexpr double kWalkSigmaDeg = 3.0;
constexpr double kJointLimitDeg = 120.0;
constexpr double kInitialPoseDeg = 25.0;

enum Stream : std::uint64_t {
  kPlacement = 1,
  kTrajectory,
  kPoseWalk,
  kYawWalk,
  kCamera,
  kPermutation,
  kLidarNoise,
  kLidarPoseNoise,
  kSyncOffset,
  kCameraNoise = 0x100,
};

using Rng = std::mt19937_64;

double region_radius(std::size_t persons) { return 1.5 + 0.9 * std::sqrt(static_cast<double>(persons)); }

Vec3 gaussian_vec(Rng& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return {x, y, z};
}

// Uniform Catmull-Rom through waypoints spaced kWaypointSpacing frames apart.
std::vector<Eigen::Vector2d> ground_track(const Eigen::Vector2d& start, std::size_t frames, double radius, Rng& rng) {
  const std::size_t segments = (frames + kWaypointSpacing - 1) / kWaypointSpacing + 1;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> step(kMinWaypointStep, kMaxWaypointStep);
  std::vector<Eigen::Vector2d> way;
  way.push_back(start);
  for (std::size_t k = 0; k < segments + 2; ++k) {
    const double a = angle(rng);
    const double s = step(rng);
    Eigen::Vector2d next = way.back() + s * Eigen::Vector2d(std::cos(a), std::sin(a));
    // Turn back toward the centre instead of leaving the region.
    if (next.norm() > radius) next = way.back() - s * way.back().normalized();
    way.push_back(next);
  }
  // way[0] acts as the phantom point before the first segment.
  std::vector<Eigen::Vector2d> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t k = t / kWaypointSpacing + 1;
    const double u = static_cast<double>(t % kWaypointSpacing) / static_cast<double>(kWaypointSpacing);
    const auto& p0 = way[k - 1];
    const auto& p1 = way[k];
    const auto& p2 = way[k + 1];
    const auto& p3 = way[k + 2];
    out[t] = 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                    (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
  }
  return out;
}

Mat3 clamp_joint(const Mat3& r) {
  Vec3 v = rotation_to_vector(r);
  const double limit = kJointLimitDeg * kDeg;
  if (v.cwiseAbs().maxCoeff() <= limit) return r;
  v = v.cwiseMax(-limit).cwiseMin(limit);
  return rotation_from_vector(v);
}

std::vector<BodyPose> pose_walk(std::size_t frames, Rng& rng) {
  std::uniform_real_distribution<double> init(-kInitialPoseDeg * kDeg, kInitialPoseDeg * kDeg);
  BodyPose pose;
  for (std::size_t j = 1; j < kJointCount; ++j) {
    const double x = init(rng);
    const double y = init(rng);
    const double z = init(rng);
    pose.rotations[j] = rotation_from_vector(Vec3(x, y, z));
  }
  std::vector<BodyPose> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    if (t > 0) {
      for (std::size_t j = 1; j < kJointCount; ++j)
        pose.rotations[j] =
            clamp_joint(nearest_rotation(pose.rotations[j] * rotation_from_vector(gaussian_vec(rng, kWalkSigmaDeg * kDeg))));
    }
    out[t] = pose;
  }
  return out;
}

BodyPose perturb_pose(const BodyPose& pose, double sigma_deg, Rng& rng) {
  if (sigma_deg <= 0.0) return pose;
  BodyPose out = pose;
  for (std::size_t j = 1; j < kJointCount; ++j)
    out.rotations[j] = pose.rotations[j] * rotation_from_vector(gaussian_vec(rng, sigma_deg * kDeg));
  return out;
}

// Camera looking at target; x right, y down, z forward.
Extrinsics look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = forward.cross(right);
  Extrinsics m;
  m.rotation.row(0) = right.transpose();
  m.rotation.row(1) = down.transpose();
  m.rotation.row(2) = forward.transpose();
  m.translation = -m.rotation * eye;
  return m;
}

// Dolly along the tangent of the ring around the scene while panning to keep the
// scene roughly centred.
std::vector<Extrinsics> camera_track(std::size_t camera, std::size_t cameras, std::size_t frames, bool moving,
                                     Rng& rng) {
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> height(1.5, 2.5);
  std::uniform_real_distribution<double> speed(0.5, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution flip(0.5);
  const double azimuth = 2.0 * std::numbers::pi * static_cast<double>(camera) / static_cast<double>(cameras) + jitter(rng);
  const double h0 = height(rng);
  const double v = (flip(rng) ? 1.0 : -1.0) * speed(rng);  // m/s
  const double bob_phase = phase(rng);
  const Vec3 radial(std::cos(azimuth), std::sin(azimuth), 0.0);
  const Vec3 tangent(-radial.y(), radial.x(), 0.0);
  const Vec3 eye0 = kCameraDistance * radial + h0 * Vec3::UnitZ();
  const Vec3 target0(0.0, 0.0, 1.0);
  std::vector<Extrinsics> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double s = moving ? static_cast<double>(t) / kSimulatorFrameRate : 0.0;
    const double bob = moving ? 0.3 * std::sin(bob_phase + 0.8 * s) : 0.0;
    const Vec3 eye = eye0 + v * s * tangent + bob * Vec3::UnitZ();
    const Vec3 target = target0 + 0.5 * v * s * tangent;
    out[t] = look_at(eye, target);
  }
  return out;
}

std::vector<Eigen::Vector2d> initial_positions(std::size_t persons, double radius, Rng& rng) {
  std::uniform_real_distribution<double> coord(-radius, radius);
  std::vector<Eigen::Vector2d> out;
  double separation = kMinSeparation;
  while (out.size() < persons) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double x = coord(rng);
      const double y = coord(rng);
      const Eigen::Vector2d p(x, y);
      if (p.norm() > radius) continue;
      if (std::all_of(out.begin(), out.end(), [&](const Eigen::Vector2d& q) { return (p - q).norm() >= separation; })) {
        out.push_back(p);
        placed = true;
      }
    }
    if (!placed) separation *= 0.9;
  }
  return out;
}

}  // namespace

void SceneConfig::validate() const {
  if (person_count < 1) throw InvalidConfig("scene: person_count must be >= 1");
  if (frames < 1) throw InvalidConfig("scene: frames must be >= 1");
  if (camera_count < 1) throw InvalidConfig("scene: camera_count must be >= 1");
  if (!(pixel_noise_sigma >= 0.0) || !std::isfinite(pixel_noise_sigma))
    throw InvalidConfig("scene: pixel_noise_sigma must be finite and >= 0");
  if (!(joint3d_noise_sigma >= 0.0) || !std::isfinite(joint3d_noise_sigma))
    throw InvalidConfig("scene: joint3d_noise_sigma must be finite and >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidConfig("scene: dropout_rate must be in [0, 1)");
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) throw InvalidConfig("scene: fov_degrees must be in (0, 180)");
  if (!(image_width > 0.0) || !(image_height > 0.0)) throw InvalidConfig("scene: image size must be positive");
  if (!(pose_noise_deg >= 0.0) || !std::isfinite(pose_noise_deg))
    throw InvalidConfig("scene: pose_noise_deg must be finite and >= 0");
  if (!(sync_deviation_deg >= 0.0) || !std::isfinite(sync_deviation_deg))
    throw InvalidConfig("scene: sync_deviation_deg must be finite and >= 0");
  std::set<std::size_t> seen;
  for (const auto& group : synchronized_pose_groups) {
    if (group.empty()) throw InvalidConfig("scene: empty synchronized pose group");
    for (auto p : group) {
      if (p >= person_count) throw InvalidConfig("scene: synchronized pose group names an unknown person");
      if (!seen.insert(p).second) throw InvalidConfig("scene: person in more than one synchronized pose group");
    }
  }
}

Intrinsics SceneConfig::intrinsics() const {
  const double f = 0.5 * image_width / std::tan(0.5 * fov_degrees * kDeg);
  return {f, f, 0.5 * image_width, 0.5 * image_height, image_width, image_height};
}

std::vector<MatchPair> SceneTruth::visible_pairs(std::size_t camera) const {
  std::vector<MatchPair> out;
  for (std::size_t p = 0; p < person_count(); ++p)
    if (std::find(visible[camera][p].begin(), visible[camera][p].end(), true) != visible[camera][p].end())
      out.push_back({p, index2d[camera][p], std::nullopt});
  return out;
}

std::vector<MatchPair> SceneTruth::visible_pairs(std::size_t camera, std::size_t frame) const {
  std::vector<MatchPair> out;
  for (std::size_t p = 0; p < person_count(); ++p)
    if (visible[camera][p][frame]) out.push_back({p, index2d[camera][p], std::nullopt});
  return out;
}

Scene generate(const SceneConfig& config, const CanonicalSkeleton& skeleton) {
  config.validate();
  const std::size_t n = config.person_count;
  const std::size_t frames = config.frames;
  const std::size_t cameras = config.camera_count;
  const double radius = region_radius(n);

  Scene scene;
  scene.config = config;
  scene.intrinsics = config.intrinsics();
  SceneTruth& truth = scene.truth;

  std::vector<std::size_t> pose_source(n);
  for (std::size_t p = 0; p < n; ++p) pose_source[p] = p;
  for (const auto& group : config.synchronized_pose_groups)
    for (auto p : group) pose_source[p] = group.front();

  Rng placement(sub_seed(config.seed, kPlacement));
  const auto starts = initial_positions(n, radius, placement);

  std::vector<std::vector<BodyPose>> walks(n);
  for (std::size_t p = 0; p < n; ++p) {
    Rng rng(sub_seed(config.seed, kPoseWalk, p));
    walks[p] = pose_walk(frames, rng);
  }
  std::vector<BodyPose> sync_offset(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (pose_source[p] == p) continue;
    Rng rng(sub_seed(config.seed, kSyncOffset, p));
    sync_offset[p] = perturb_pose(BodyPose::identity(), config.sync_deviation_deg, rng);
  }

  truth.joints.assign(n, std::vector<Joints3>(frames));
  truth.poses.assign(n, std::vector<BodyPose>(frames));
  for (std::size_t p = 0; p < n; ++p) {
    Rng path_rng(sub_seed(config.seed, kTrajectory, p));
    const auto path = ground_track(starts[p], frames, radius, path_rng);
    Rng yaw_rng(sub_seed(config.seed, kYawWalk, p));
    std::uniform_real_distribution<double> yaw0(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> dyaw(0.0, kWalkSigmaDeg * kDeg);
    double yaw = yaw0(yaw_rng);
    for (std::size_t t = 0; t < frames; ++t) {
      if (t > 0) yaw += dyaw(yaw_rng);
      BodyPose pose = walks[pose_source[p]][t];
      for (std::size_t j = 1; j < kJointCount; ++j) pose.rotations[j] = pose.rotations[j] * sync_offset[p].rotations[j];
      pose.rotations[0] = rotation_z(yaw);
      truth.poses[p][t] = pose;
      truth.joints[p][t] = forward_kinematics(skeleton, pose, Vec3(path[t].x(), path[t].y(), kPelvisHeight));
    }
  }

  truth.extrinsics.resize(cameras);
  truth.index2d.resize(cameras);
  for (std::size_t c = 0; c < cameras; ++c) {
    Rng cam_rng(sub_seed(config.seed, kCamera, c));
    truth.extrinsics[c] = camera_track(c, cameras, frames, config.moving_cameras, cam_rng);
    Rng perm_rng(sub_seed(config.seed, kPermutation, c));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(perm_rng)]);
    }
    truth.index2d[c] = perm;
  }

  // LiDAR side: every person is observed in every frame.
  scene.tracks3d.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto& track = scene.tracks3d[p];
    track.person_id = "p" + std::to_string(p);
    track.joints.resize(frames);
    track.body_pose.resize(frames);
    track.valid.assign(frames, true);
  }
  for (std::size_t t = 0; t < frames; ++t) {
    Rng noise(sub_seed(config.seed, kLidarNoise, t));
    Rng pose_noise(sub_seed(config.seed, kLidarPoseNoise, t));
    for (std::size_t p = 0; p < n; ++p) {
      auto& track = scene.tracks3d[p];
      for (std::size_t j = 0; j < kJointCount; ++j) {
        const Vec3 e = gaussian_vec(noise, 1.0);
        track.joints[t][j] = truth.joints[p][t][j] + config.joint3d_noise_sigma * e;
      }
      track.body_pose[t] = perturb_pose(truth.poses[p][t], config.pose_noise_deg, pose_noise);
    }
  }

  // Camera side.
  const Intrinsics& k = scene.intrinsics;
  truth.visible.assign(cameras, std::vector<std::vector<bool>>(n, std::vector<bool>(frames, false)));
  scene.tracks2d.resize(cameras);
  for (std::size_t c = 0; c < cameras; ++c) {
    auto& list = scene.tracks2d[c];
    list.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
      auto& track = list[truth.index2d[c][p]];
      track = PersonTrack2D::invalid("c" + std::to_string(c) + "p" + std::to_string(truth.index2d[c][p]), frames);
    }
    for (std::size_t t = 0; t < frames; ++t) {
      const Extrinsics& m = truth.extrinsics[c][t];
      const ProjectionMatrix proj(k, m);
      Rng rng(sub_seed(config.seed, kCameraNoise + c, t));
      std::normal_distribution<double> pixel_noise(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t p = 0; p < n; ++p) {
        auto& track = list[truth.index2d[c][p]];
        Joints2 joints;
        JointWeights confidence{};
        std::size_t in_image = 0;
        for (std::size_t j = 0; j < kJointCount; ++j) {
          const double ex = pixel_noise(rng);
          const double ey = pixel_noise(rng);
          const bool dropped = unit(rng) < config.dropout_rate;
          const auto pixel = proj.try_project(truth.joints[p][t][j]);
          joints[j] = Vec2::Zero();
          if (!pixel) continue;
          const bool inside = pixel->x() >= 0.0 && pixel->x() < k.width && pixel->y() >= 0.0 && pixel->y() < k.height;
          in_image += inside ? 1 : 0;
          joints[j] = *pixel + config.pixel_noise_sigma * Vec2(ex, ey);
          confidence[j] = inside && !dropped ? 1.0 : 0.0;
        }
        Rng pose_rng(sub_seed(config.seed, kCameraNoise + c, (t << 16) ^ (p + 1)));
        BodyPose observed = perturb_pose(truth.poses[p][t], config.pose_noise_deg, pose_rng);
        observed.rotations[0] = m.rotation * truth.poses[p][t].rotations[0];
        const bool visible = in_image >= kMinJointlyValidJoints;
        truth.visible[c][p][t] = visible;
        if (!visible) continue;
        track.joints[t] = joints;
        track.confidence[t] = confidence;
        track.body_pose[t] = observed;
        track.valid[t] = true;
      }
    }
  }
  return scene;
}

double accuracy(const MatchSet& result, const SceneTruth& truth, std::size_t camera) {
  const auto expected = truth.visible_pairs(camera);
  if (expected.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& e : expected)
    if (result.partner_of_3d(e.idx3d) == e.idx2d) ++hit;
  return static_cast<double>(hit) / static_cast<double>(expected.size());
}

double accuracy(const MatchSet& result, const SceneTruth& truth, std::size_t camera, std::size_t frame) {
  const auto expected = truth.visible_pairs(camera, frame);
  if (expected.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& e : expected)
    if (result.partner_of_3d(e.idx3d) == e.idx2d) ++hit;
  return static_cast<double>(hit) / static_cast<double>(expected.size());
}

}  // namespace xalign
