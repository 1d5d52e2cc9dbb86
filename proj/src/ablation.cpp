#include <algorithm>
#include <limits>
#include <numeric>

#include "xalign/errors.hpp"
#include "xalign/matching.hpp"
#include "xalign/seeding.hpp"

namespace xalign {
namespace {

using LocalPairs = std::vector<std::pair<std::size_t, std::size_t>>;

constexpr std::uint64_t kKeypointSingleStream = 0x4b50;

MatchSet to_track_indices(const FrameData& fd, const LocalPairs& pairs) {
  MatchSet out;
  for (const auto& [a, b] : pairs) out.pairs.push_back({fd.persons3d[a].track, fd.persons2d[b].track, std::nullopt});
  out.complete(fd.n3d, fd.n2d);
  return out;
}

double pair_cost(const FrameData& fd, std::size_t a, std::size_t b, const Extrinsics& m, const Intrinsics& k,
                 double lambda0, const CanonicalSkeleton& skeleton) {
  const auto& p3 = fd.persons3d[a];
  const auto& p2 = fd.persons2d[b];
  return reprojection_cost(p3.joints, p2.joints, p2.confidence, m, k) +
         lambda0 * body_pose_cost(p3.pose, p2.pose, p3.joints[0], m, k, skeleton);
}

struct Scored {
  double cost = std::numeric_limits<double>::infinity();
  LocalPairs pairs;
};

// Total weighted cost of a candidate matching under the pose it induces.
std::optional<double> candidate_cost(const FrameData& fd, const LocalPairs& pairs, const Intrinsics& k,
                                     const PcmConfig& config, const CanonicalSkeleton& skeleton) {
  try {
    const Extrinsics m = solve_pnp_for_pairs(fd, pairs, k).extrinsics;
    double total = 0.0;
    for (const auto& [a, b] : pairs) total += pair_cost(fd, a, b, m, k, config.lambda0, skeleton);
    return total;
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

MatchSet pose_only(const FrameData& fd) {
  Eigen::MatrixXd sim(static_cast<Eigen::Index>(fd.persons3d.size()), static_cast<Eigen::Index>(fd.persons2d.size()));
  for (std::size_t a = 0; a < fd.persons3d.size(); ++a)
    for (std::size_t b = 0; b < fd.persons2d.size(); ++b)
      sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          frame_pose_similarity(fd.persons3d[a].pose, fd.persons2d[b].pose);
  LocalPairs pairs;
  for (const auto& p : hungarian(CostMatrix{sim, Orientation::kMaximize}).pairs) pairs.emplace_back(p.idx3d, p.idx2d);
  return to_track_indices(fd, pairs);
}

// One random 3D person seeds a PnP against every 2D person; the best induced assignment wins.
MatchSet keypoint_single(const FrameData& fd, std::size_t frame, const Intrinsics& k, const PcmConfig& config,
                         const CanonicalSkeleton& skeleton) {
  const std::size_t a = sub_seed(config.seed, kKeypointSingleStream, frame) % fd.persons3d.size();
  Scored best;
  for (std::size_t b = 0; b < fd.persons2d.size(); ++b) {
    const LocalPairs seed{{a, b}};
    Extrinsics m;
    try {
      m = solve_pnp_for_pairs(fd, seed, k).extrinsics;
    } catch (const NumericalError&) {
      continue;
    }
    Eigen::MatrixXd q(static_cast<Eigen::Index>(fd.persons3d.size()), static_cast<Eigen::Index>(fd.persons2d.size()));
    for (std::size_t i = 0; i < fd.persons3d.size(); ++i)
      for (std::size_t j = 0; j < fd.persons2d.size(); ++j)
        q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pair_cost(fd, i, j, m, k, config.lambda0, skeleton);
    const MatchSet assigned = hungarian(CostMatrix{q, Orientation::kMinimize});
    const double total = assignment_total(CostMatrix{q, Orientation::kMinimize}, assigned);
    if (total < best.cost) {
      best.cost = total;
      best.pairs.clear();
      for (const auto& p : assigned.pairs) best.pairs.emplace_back(p.idx3d, p.idx2d);
    }
  }
  if (best.pairs.empty()) throw NoViableProposal("KP: every seed PnP failed");
  return to_track_indices(fd, best.pairs);
}

// Every injection of the smaller side into the larger, each scored under its own PnP.
MatchSet keypoints_exhaustive(const FrameData& fd, const Intrinsics& k, const PcmConfig& config,
                              const CanonicalSkeleton& skeleton) {
  const std::size_t n3 = fd.persons3d.size();
  const std::size_t n2 = fd.persons2d.size();
  if (std::max(n3, n2) > kMaxExhaustivePersons)
    throw CombinatorialLimit("KPs: exhaustive search is limited to " + std::to_string(kMaxExhaustivePersons) +
                             " persons per side");
  const bool rows_small = n3 <= n2;
  const std::size_t small = std::min(n3, n2);
  const std::size_t large = std::max(n3, n2);

  Scored best;
  std::vector<std::size_t> chosen;
  std::vector<bool> used(large, false);
  auto recurse = [&](auto&& self) -> void {
    if (chosen.size() == small) {
      LocalPairs pairs;
      for (std::size_t s = 0; s < small; ++s)
        pairs.emplace_back(rows_small ? s : chosen[s], rows_small ? chosen[s] : s);
      std::sort(pairs.begin(), pairs.end());
      const auto cost = candidate_cost(fd, pairs, k, config, skeleton);
      // Strict improvement keeps the lexicographically first optimum.
      if (cost && (*cost < best.cost || (*cost == best.cost && pairs < best.pairs))) {
        best.cost = *cost;
        best.pairs = std::move(pairs);
      }
      return;
    }
    for (std::size_t l = 0; l < large; ++l) {
      if (used[l]) continue;
      used[l] = true;
      chosen.push_back(l);
      self(self);
      chosen.pop_back();
      used[l] = false;
    }
  };
  recurse(recurse);
  if (best.pairs.empty()) throw NoViableProposal("KPs: no injection admitted a pose");
  return to_track_indices(fd, best.pairs);
}

}  // namespace

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kKeypointsExhaustive:
      return "KPs";
    case AblationMode::kKeypointSingle:
      return "KP";
    case AblationMode::kPose:
      return "Pose";
    case AblationMode::kPoseKeypoints:
      return "P&K";
    case AblationMode::kPoseTemporal:
      return "P&T";
    case AblationMode::kFull:
      return "P&T&K";
  }
  return "?";
}

AblationMode parse_ablation_mode(std::string_view name) {
  for (auto mode : kAllAblationModes)
    if (to_string(mode) == name) return mode;
  throw UsageError("unknown ablation mode '" + std::string(name) + "' (expected KPs, KP, Pose, P&K, P&T or P&T&K)");
}

bool is_single_frame(AblationMode mode) {
  return mode != AblationMode::kPoseTemporal && mode != AblationMode::kFull;
}

std::optional<std::size_t> reference_frame(std::span<const PersonTrack3D> tracks3d,
                                           std::span<const PersonTrack2D> tracks2d) {
  std::size_t frames = 0;
  for (const auto& p : tracks3d) frames = std::max(frames, p.frame_count());
  for (const auto& p : tracks2d) frames = std::max(frames, p.frame_count());
  std::optional<std::size_t> best;
  std::size_t best_count = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameData fd = frame_data(tracks3d, tracks2d, t);
    const std::size_t n = std::min(fd.persons3d.size(), fd.persons2d.size());
    if (n > best_count) {
      best_count = n;
      best = t;
    }
  }
  return best;
}

MatchSet ablation_match(AblationMode mode, std::span<const PersonTrack3D> tracks3d,
                        std::span<const PersonTrack2D> tracks2d, const Intrinsics& k, const PcmConfig& config,
                        std::optional<std::size_t> frame, const ExecutionOptions& exec,
                        const CanonicalSkeleton& skeleton) {
  config.validate();
  if (mode == AblationMode::kFull) return pcm(tracks3d, tracks2d, k, config, exec, skeleton).match;
  if (mode == AblationMode::kPoseTemporal) return initial_match(tracks3d, tracks2d, k, config).match;

  if (!frame) frame = reference_frame(tracks3d, tracks2d);
  MatchSet empty;
  empty.complete(tracks3d.size(), tracks2d.size());
  if (!frame) return empty;
  const FrameData fd = frame_data(tracks3d, tracks2d, *frame);
  if (fd.persons3d.empty() || fd.persons2d.empty()) return empty;

  switch (mode) {
    case AblationMode::kPose:
      return pose_only(fd);
    case AblationMode::kPoseKeypoints:
      return opt_match(fd, k, config, skeleton).match;
    case AblationMode::kKeypointSingle:
      return keypoint_single(fd, *frame, k, config, skeleton);
    case AblationMode::kKeypointsExhaustive:
      return keypoints_exhaustive(fd, k, config, skeleton);
    default:
      break;
  }
  return empty;
}

}  // namespace xalign
