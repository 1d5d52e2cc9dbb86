#include <cmath>

#include "projection_internal.hpp"
#include "xalign/errors.hpp"
#include "xalign/matching.hpp"

namespace xalign {

PersonTrack3D PersonTrack3D::invalid(std::string id, std::size_t frames) {
  PersonTrack3D t;
  t.person_id = std::move(id);
  Joints3 zeros;
  zeros.fill(Vec3::Zero());
  t.joints.assign(frames, zeros);
  t.body_pose.assign(frames, BodyPose::identity());
  t.valid.assign(frames, false);
  return t;
}

PersonTrack2D PersonTrack2D::invalid(std::string id, std::size_t frames) {
  PersonTrack2D t;
  t.person_id = std::move(id);
  Joints2 zeros;
  zeros.fill(Vec2::Zero());
  t.joints.assign(frames, zeros);
  t.confidence.assign(frames, JointWeights{});
  t.body_pose.assign(frames, BodyPose::identity());
  t.valid.assign(frames, false);
  return t;
}

void PcmConfig::validate() const {
  if (!(delta >= 0.0)) throw InvalidConfig("pcm: delta must be >= 0");
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw InvalidConfig("pcm: lambda0 must be finite and >= 0");
  if (n_iter < 1) throw InvalidConfig("pcm: n_iter must be >= 1");
  if (reject_threshold && !(*reject_threshold > 0.0)) throw InvalidConfig("pcm: reject_threshold must be positive");
  if (smoothing_window < 1 || smoothing_window % 2 == 0)
    throw InvalidConfig("pcm: smoothing_window must be odd and >= 1");
}

double PcmConfig::reject_threshold_px(const Intrinsics& k) const {
  return reject_threshold.value_or(0.05 * k.diagonal());
}

std::size_t observed_joint_count(const JointWeights& confidence) {
  std::size_t n = 0;
  for (double c : confidence) n += c > 0.0 ? 1 : 0;
  return n;
}

FrameData frame_data(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d,
                     std::size_t frame) {
  FrameData fd;
  fd.n3d = tracks3d.size();
  fd.n2d = tracks2d.size();
  for (std::size_t i = 0; i < tracks3d.size(); ++i) {
    const auto& t = tracks3d[i];
    if (frame < t.frame_count() && t.valid[frame]) fd.persons3d.push_back({i, t.joints[frame], t.body_pose[frame]});
  }
  for (std::size_t j = 0; j < tracks2d.size(); ++j) {
    const auto& t = tracks2d[j];
    if (frame < t.frame_count() && t.valid[frame] && observed_joint_count(t.confidence[frame]) >= kMinJointlyValidJoints)
      fd.persons2d.push_back({j, t.joints[frame], t.confidence[frame], t.body_pose[frame]});
  }
  return fd;
}

std::array<double, kFlatPoseSize> flatten_body_pose(const BodyPose& pose) {
  std::array<double, kFlatPoseSize> out{};
  std::size_t n = 0;
  for (std::size_t j = 1; j < kJointCount; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out[n++] = pose.rotations[j](r, c);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double frame_pose_similarity(const BodyPose& a, const BodyPose& b) {
  const auto fa = flatten_body_pose(a);
  const auto fb = flatten_body_pose(b);
  return cosine_similarity(fa, fb);
}

double pose_similarity(const PersonTrack3D& track3d, const PersonTrack2D& track2d) {
  const std::size_t frames = std::min(track3d.frame_count(), track2d.frame_count());
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (!track3d.valid[t] || !track2d.valid[t]) continue;
    acc += frame_pose_similarity(track3d.body_pose[t], track2d.body_pose[t]);
    ++count;
  }
  if (count == 0) throw NoCommonFrames();
  return acc / static_cast<double>(count);
}

double reprojection_cost(const Joints3& joints3d, const Joints2& joints2d, const JointWeights& confidence,
                         const Extrinsics& m, const Intrinsics& k) {
  return detail::weighted_distance(detail::project_joints(joints3d, m, k), joints2d, confidence, k.diagonal());
}

namespace {

void require_covalid(const PersonTrack3D& a, const PersonTrack2D& b, std::size_t frame) {
  if (frame >= a.frame_count() || frame >= b.frame_count() || !a.valid[frame] || !b.valid[frame])
    throw DataError("cost requested for a frame where the tracks are not both valid");
}

}  // namespace

double reprojection_cost(const PersonTrack3D& track3d, const PersonTrack2D& track2d, const Extrinsics& m,
                         const Intrinsics& k, std::size_t frame) {
  require_covalid(track3d, track2d, frame);
  return reprojection_cost(track3d.joints[frame], track2d.joints[frame], track2d.confidence[frame], m, k);
}

double body_pose_cost(const BodyPose& pose3d, const BodyPose& pose2d, const Vec3& root, const Extrinsics& m,
                      const Intrinsics& k, const CanonicalSkeleton& skeleton) {
  const auto a = detail::project_joints(forward_kinematics(skeleton, pose3d, root), m, k);
  const auto b = detail::project_joints(forward_kinematics(skeleton, detail::with_root_of(pose2d, pose3d), root), m, k);
  return detail::mean_distance(a, b, k.diagonal());
}

double weighted_cost(const PersonTrack3D& track3d, const PersonTrack2D& track2d, const Extrinsics& m,
                     const Intrinsics& k, std::size_t frame, double lambda0, const CanonicalSkeleton& skeleton) {
  const double reprojection = reprojection_cost(track3d, track2d, m, k, frame);
  const double pose = body_pose_cost(track3d.body_pose[frame], track2d.body_pose[frame], track3d.joints[frame][0], m,
                                     k, skeleton);
  return reprojection + lambda0 * pose;
}

PnpResult solve_pnp_for_pairs(const FrameData& frame, std::span<const std::pair<std::size_t, std::size_t>> local_pairs,
                              const Intrinsics& k) {
  std::vector<Vec3> pts3;
  std::vector<Vec2> pts2;
  pts3.reserve(local_pairs.size() * kJointCount);
  pts2.reserve(local_pairs.size() * kJointCount);
  for (const auto& [a, b] : local_pairs) {
    const auto& p3 = frame.persons3d[a];
    const auto& p2 = frame.persons2d[b];
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (!(p2.confidence[j] > 0.0)) continue;
      pts3.push_back(p3.joints[j]);
      pts2.push_back(p2.joints[j]);
    }
  }
  return solve_pnp(pts3, pts2, k);
}

}  // namespace xalign
