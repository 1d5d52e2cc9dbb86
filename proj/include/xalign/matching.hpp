#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xalign/assignment.hpp"
#include "xalign/geometry.hpp"

namespace xalign {

// LiDAR-side person: world-frame joints and body pose per frame.
struct PersonTrack3D {
  std::string person_id;
  std::vector<Joints3> joints;
  std::vector<BodyPose> body_pose;
  std::vector<bool> valid;

  std::size_t frame_count() const { return valid.size(); }
  static PersonTrack3D invalid(std::string id, std::size_t frames);

  friend bool operator==(const PersonTrack3D&, const PersonTrack3D&) = default;
};

// Camera-side person: pixel joints with per-joint confidence (0 = not observed).
struct PersonTrack2D {
  std::string person_id;
  std::vector<Joints2> joints;
  std::vector<JointWeights> confidence;
  std::vector<BodyPose> body_pose;
  std::vector<bool> valid;

  std::size_t frame_count() const { return valid.size(); }
  static PersonTrack2D invalid(std::string id, std::size_t frames);

  friend bool operator==(const PersonTrack2D&, const PersonTrack2D&) = default;
};

// Variance gate threshold is expressed in cm^2; translations are in meters.
inline constexpr double kDeltaUnitsPerSquareMeter = 1e4;

struct PcmConfig {
  // Variance gate on the per-frame translation estimates, cm^2.
  double delta = 100.0;
  // Weight of the body-pose reprojection term.
  double lambda0 = 0.1;
  // Refinement rounds per OptMatch proposal.
  int n_iter = 2;
  // Pairs whose mean reprojection error exceeds this (pixels) are dropped; unset = 5% of the image diagonal.
  std::optional<double> reject_threshold;
  // Median window (frames) for the per-frame extrinsics.
  int smoothing_window = 9;
  // Seed for the single random person of the "KP" ablation.
  std::uint64_t seed = 0;

  void validate() const;
  double reject_threshold_px(const Intrinsics& k) const;

  friend bool operator==(const PcmConfig&, const PcmConfig&) = default;
};

inline constexpr std::size_t kMinJointlyValidJoints = 6;

std::size_t observed_joint_count(const JointWeights& confidence);

// One frame of every track. Only persons valid in the frame appear; 2D persons also
// need at least kMinJointlyValidJoints observed joints. track indexes the full lists.
struct FramePerson3D {
  std::size_t track = 0;
  Joints3 joints;
  BodyPose pose;
};

struct FramePerson2D {
  std::size_t track = 0;
  Joints2 joints;
  JointWeights confidence{};
  BodyPose pose;
};

struct FrameData {
  std::size_t n3d = 0;
  std::size_t n2d = 0;
  std::vector<FramePerson3D> persons3d;
  std::vector<FramePerson2D> persons2d;
};

FrameData frame_data(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d,
                     std::size_t frame);

// --- body-pose similarity ---------------------------------------------------

inline constexpr std::size_t kFlatPoseSize = (kJointCount - 1) * 9;

// The 23 non-root rotations, row-major, concatenated.
std::array<double, kFlatPoseSize> flatten_body_pose(const BodyPose& pose);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double frame_pose_similarity(const BodyPose& a, const BodyPose& b);
// Mean per-frame cosine over co-valid frames. Throws NoCommonFrames.
double pose_similarity(const PersonTrack3D& track3d, const PersonTrack2D& track2d);

// --- costs ------------------------------------------------------------------

// Confidence-weighted mean pixel distance; joints behind the camera cost the image diagonal.
double reprojection_cost(const Joints3& joints3d, const Joints2& joints2d, const JointWeights& confidence,
                         const Extrinsics& m, const Intrinsics& k);
double reprojection_cost(const PersonTrack3D& track3d, const PersonTrack2D& track2d, const Extrinsics& m,
                         const Intrinsics& k, std::size_t frame);

// Mean pixel distance between the projected skeletons of the two poses, both rooted at
// root and both using pose3d's root orientation.
double body_pose_cost(const BodyPose& pose3d, const BodyPose& pose2d, const Vec3& root, const Extrinsics& m,
                      const Intrinsics& k, const CanonicalSkeleton& skeleton = CanonicalSkeleton::builtin());

double weighted_cost(const PersonTrack3D& track3d, const PersonTrack2D& track2d, const Extrinsics& m,
                     const Intrinsics& k, std::size_t frame, double lambda0,
                     const CanonicalSkeleton& skeleton = CanonicalSkeleton::builtin());

// Pose from every observed joint of every pair. Throws like solve_pnp.
PnpResult solve_pnp_for_pairs(const FrameData& frame, std::span<const std::pair<std::size_t, std::size_t>> local_pairs,
                              const Intrinsics& k);

// --- single-frame matching --------------------------------------------------

struct OptMatchResult {
  MatchSet match;  // indices refer to the full track lists
  Extrinsics extrinsics;
  // Negated total weighted cost of the winning proposal.
  double score = 0.0;
  // Pairs of the winning proposal before rejection.
  std::size_t scored_pairs = 0;
  // Best score after each refinement step, in evaluation order.
  std::vector<double> best_score_trace;
  std::size_t proposals = 0;
};

// Proposal search: one PnP per seed pair, Hungarian over the induced costs, then
// n_iter refinement rounds per proposal. Throws NoViableProposal.
OptMatchResult opt_match(const FrameData& frame, const Intrinsics& k, const PcmConfig& config,
                         const CanonicalSkeleton& skeleton = CanonicalSkeleton::builtin());

// --- sequence matching ------------------------------------------------------

// Sum of per-axis sample variances of the translations, m^2. Zero for a single frame.
double variance_of_translations(std::span<const Extrinsics> extrinsics);

using ExtrinsicsTrack = std::vector<std::optional<Extrinsics>>;

// Per-axis median of translations and component-wise median of hemisphere-aligned
// quaternions (renormalized) over a centered window. Missing frames stay missing.
ExtrinsicsTrack smooth_extrinsics(const ExtrinsicsTrack& raw, int window);

// Pose per frame from all observed joints of the match's pairs; nullopt where PnP fails.
ExtrinsicsTrack per_frame_extrinsics(std::span<const PersonTrack3D> tracks3d,
                                     std::span<const PersonTrack2D> tracks2d, const MatchSet& match,
                                     const Intrinsics& k);

// Sets each pair's residual to its mean reprojection error over the frames that have
// extrinsics and where both tracks are valid; nullopt if there are none.
void score_match(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d,
                 const Intrinsics& k, const ExtrinsicsTrack& extrinsics, MatchSet& match);

struct ExecutionOptions {
  std::size_t threads = 1;
};

struct InitialMatch {
  MatchSet match;
  ExtrinsicsTrack extrinsics;  // raw per-frame PnP of the match
};

// Hungarian over sequence pose similarity, then per-frame PnP; pairs whose mean
// reprojection error exceeds the threshold are dropped.
InitialMatch initial_match(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d,
                           const Intrinsics& k, const PcmConfig& config);

struct PcmDiagnostics {
  double variance = 0.0;  // m^2
  bool keypoint_path = false;
  std::size_t opt_match_calls = 0;
  std::size_t failed_frames = 0;
  // Frames with persons on both sides where OptMatch found no viable proposal.
  std::vector<std::size_t> skipped_frames;
};

struct PcmResult {
  MatchSet match;
  ExtrinsicsTrack extrinsics;  // smoothed
  PcmDiagnostics diagnostics;
};

PcmResult pcm(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d, const Intrinsics& k,
              const PcmConfig& config, const ExecutionOptions& exec = {},
              const CanonicalSkeleton& skeleton = CanonicalSkeleton::builtin());

// --- ablation ---------------------------------------------------------------

enum class AblationMode {
  kKeypointsExhaustive,  // "KPs"
  kKeypointSingle,       // "KP"
  kPose,                 // "Pose"
  kPoseKeypoints,        // "P&K"
  kPoseTemporal,         // "P&T"
  kFull,                 // "P&T&K"
};

inline constexpr std::array<AblationMode, 6> kAllAblationModes{
    AblationMode::kKeypointsExhaustive, AblationMode::kKeypointSingle, AblationMode::kPose,
    AblationMode::kPoseKeypoints,       AblationMode::kPoseTemporal,   AblationMode::kFull};

std::string_view to_string(AblationMode mode);
// Throws UsageError for unknown names.
AblationMode parse_ablation_mode(std::string_view name);
bool is_single_frame(AblationMode mode);

// Largest injection search the exhaustive mode accepts (max persons per side).
inline constexpr std::size_t kMaxExhaustivePersons = 8;

// Frame with the most matchable persons (min of both sides), earliest on ties.
std::optional<std::size_t> reference_frame(std::span<const PersonTrack3D> tracks3d,
                                           std::span<const PersonTrack2D> tracks2d);

// Single-frame modes run on `frame` (default: reference_frame); sequence modes ignore it.
MatchSet ablation_match(AblationMode mode, std::span<const PersonTrack3D> tracks3d,
                        std::span<const PersonTrack2D> tracks2d, const Intrinsics& k, const PcmConfig& config,
                        std::optional<std::size_t> frame = std::nullopt, const ExecutionOptions& exec = {},
                        const CanonicalSkeleton& skeleton = CanonicalSkeleton::builtin());

}  // namespace xalign
