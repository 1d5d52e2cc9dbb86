#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "xalign/errors.hpp"
#include "xalign/matching.hpp"
#include "xalign/parallel.hpp"

namespace xalign {
namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void score_match(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d,
                 const Intrinsics& k, const ExtrinsicsTrack& extrinsics, MatchSet& match) {
  for (auto& pair : match.pairs) {
    const auto& t3 = tracks3d[pair.idx3d];
    const auto& t2 = tracks2d[pair.idx2d];
    double acc = 0.0;
    std::size_t frames = 0;
    for (std::size_t t = 0; t < extrinsics.size(); ++t) {
      if (!extrinsics[t] || t >= t3.frame_count() || t >= t2.frame_count() || !t3.valid[t] || !t2.valid[t]) continue;
      if (observed_joint_count(t2.confidence[t]) < kMinJointlyValidJoints) continue;
      acc += reprojection_cost(t3, t2, *extrinsics[t], k, t);
      ++frames;
    }
    pair.residual = frames > 0 ? std::optional<double>(acc / static_cast<double>(frames)) : std::nullopt;
  }
}

namespace {

std::size_t timeline_length(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d) {
  std::size_t t = 0;
  for (const auto& p : tracks3d) t = std::max(t, p.frame_count());
  for (const auto& p : tracks2d) t = std::max(t, p.frame_count());
  return t;
}

// Extrinsics and residuals for a sequence-level match. The worst pair above the
// threshold is dropped and the poses re-solved until every pair fits.
ExtrinsicsTrack finalize_sequence_match(std::span<const PersonTrack3D> tracks3d,
                                        std::span<const PersonTrack2D> tracks2d, const Intrinsics& k,
                                        const PcmConfig& config, MatchSet& match) {
  const double threshold = config.reject_threshold_px(k);
  for (;;) {
    ExtrinsicsTrack extrinsics = per_frame_extrinsics(tracks3d, tracks2d, match, k);
    score_match(tracks3d, tracks2d, k, extrinsics, match);
    auto worst = match.pairs.end();
    for (auto it = match.pairs.begin(); it != match.pairs.end(); ++it)
      if (it->residual && *it->residual > threshold && (worst == match.pairs.end() || *it->residual > *worst->residual))
        worst = it;
    if (worst == match.pairs.end()) return extrinsics;
    match.pairs.erase(worst);
    match.complete(tracks3d.size(), tracks2d.size());
  }
}

}  // namespace

double variance_of_translations(std::span<const Extrinsics> extrinsics) {
  if (extrinsics.empty()) throw DataError("variance of an empty extrinsics sequence");
  if (extrinsics.size() == 1) return 0.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& m : extrinsics) mean += m.translation;
  mean /= static_cast<double>(extrinsics.size());
  Vec3 ss = Vec3::Zero();
  for (const auto& m : extrinsics) ss += (m.translation - mean).cwiseAbs2();
  return ss.sum() / static_cast<double>(extrinsics.size() - 1);
}

ExtrinsicsTrack smooth_extrinsics(const ExtrinsicsTrack& raw, int window) {
  if (window < 1 || window % 2 == 0) throw InvalidConfig("smoothing window must be odd and >= 1");
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  const auto n = static_cast<std::ptrdiff_t>(raw.size());
  ExtrinsicsTrack out(raw.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    if (!raw[static_cast<std::size_t>(t)]) continue;
    const Eigen::Vector4d reference = rotation_to_quaternion(raw[static_cast<std::size_t>(t)]->rotation);
    std::array<std::vector<double>, 3> tr;
    std::array<std::vector<double>, 4> q;
    for (std::ptrdiff_t s = std::max<std::ptrdiff_t>(0, t - half); s <= std::min(n - 1, t + half); ++s) {
      const auto& m = raw[static_cast<std::size_t>(s)];
      if (!m) continue;
      for (int a = 0; a < 3; ++a) tr[static_cast<std::size_t>(a)].push_back(m->translation[a]);
      Eigen::Vector4d qs = rotation_to_quaternion(m->rotation);
      if (qs.dot(reference) < 0.0) qs = -qs;
      for (int a = 0; a < 4; ++a) q[static_cast<std::size_t>(a)].push_back(qs[a]);
    }
    Extrinsics smoothed;
    for (int a = 0; a < 3; ++a) smoothed.translation[a] = median(tr[static_cast<std::size_t>(a)]);
    Eigen::Vector4d qm;
    for (int a = 0; a < 4; ++a) qm[a] = median(q[static_cast<std::size_t>(a)]);
    smoothed.rotation = quaternion_to_rotation(qm / qm.norm());
    out[static_cast<std::size_t>(t)] = smoothed;
  }
  return out;
}

ExtrinsicsTrack per_frame_extrinsics(std::span<const PersonTrack3D> tracks3d,
                                     std::span<const PersonTrack2D> tracks2d, const MatchSet& match,
                                     const Intrinsics& k) {
  const std::size_t frames = timeline_length(tracks3d, tracks2d);
  ExtrinsicsTrack out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameData fd = frame_data(tracks3d, tracks2d, t);
    std::vector<std::pair<std::size_t, std::size_t>> local;
    for (const auto& p : match.pairs) {
      const auto a = std::find_if(fd.persons3d.begin(), fd.persons3d.end(),
                                  [&](const FramePerson3D& x) { return x.track == p.idx3d; });
      const auto b = std::find_if(fd.persons2d.begin(), fd.persons2d.end(),
                                  [&](const FramePerson2D& x) { return x.track == p.idx2d; });
      if (a == fd.persons3d.end() || b == fd.persons2d.end()) continue;
      local.emplace_back(static_cast<std::size_t>(a - fd.persons3d.begin()),
                         static_cast<std::size_t>(b - fd.persons2d.begin()));
    }
    if (local.empty()) continue;
    try {
      out[t] = solve_pnp_for_pairs(fd, local, k).extrinsics;
    } catch (const NumericalError&) {
    }
  }
  return out;
}

InitialMatch initial_match(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d,
                           const Intrinsics& k, const PcmConfig& config) {
  config.validate();
  const auto n3d = static_cast<Eigen::Index>(tracks3d.size());
  const auto n2d = static_cast<Eigen::Index>(tracks2d.size());
  CostMatrix sim{Eigen::MatrixXd::Zero(n3d, n2d), Orientation::kMaximize};
  std::vector<std::vector<bool>> comparable(tracks3d.size(), std::vector<bool>(tracks2d.size(), true));
  for (Eigen::Index i = 0; i < n3d; ++i) {
    for (Eigen::Index j = 0; j < n2d; ++j) {
      try {
        sim.values(i, j) = pose_similarity(tracks3d[static_cast<std::size_t>(i)], tracks2d[static_cast<std::size_t>(j)]);
      } catch (const NoCommonFrames&) {
        // Below any cosine; such pairs are removed after the assignment.
        sim.values(i, j) = -2.0;
        comparable[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = false;
      }
    }
  }
  InitialMatch out;
  out.match = hungarian(sim);
  std::erase_if(out.match.pairs, [&](const MatchPair& p) { return !comparable[p.idx3d][p.idx2d]; });
  for (auto& p : out.match.pairs) p.residual.reset();
  out.match.complete(tracks3d.size(), tracks2d.size());
  out.extrinsics = finalize_sequence_match(tracks3d, tracks2d, k, config, out.match);
  return out;
}

PcmResult pcm(std::span<const PersonTrack3D> tracks3d, std::span<const PersonTrack2D> tracks2d, const Intrinsics& k,
              const PcmConfig& config, const ExecutionOptions& exec, const CanonicalSkeleton& skeleton) {
  config.validate();
  PcmResult result;
  InitialMatch init = initial_match(tracks3d, tracks2d, k, config);

  std::vector<Extrinsics> estimated;
  for (const auto& m : init.extrinsics)
    if (m) estimated.push_back(*m);
  const double variance =
      estimated.empty() ? std::numeric_limits<double>::infinity() : variance_of_translations(estimated);
  result.diagnostics.variance = variance;

  if (variance * kDeltaUnitsPerSquareMeter <= config.delta) {
    result.match = std::move(init.match);
    result.extrinsics = smooth_extrinsics(init.extrinsics, config.smoothing_window);
    return result;
  }

  result.diagnostics.keypoint_path = true;
  const std::size_t frames = timeline_length(tracks3d, tracks2d);
  std::vector<std::optional<OptMatchResult>> per_frame(frames);
  std::vector<char> attempted(frames, 0);
  parallel_for(frames, exec.threads, [&](std::size_t t) {
    const FrameData fd = frame_data(tracks3d, tracks2d, t);
    if (fd.persons3d.empty() || fd.persons2d.empty()) return;
    attempted[t] = 1;
    try {
      per_frame[t] = opt_match(fd, k, config, skeleton);
    } catch (const NumericalError&) {
    }
  });

  // Accumulate in frame order so the sum is independent of the thread count.
  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tracks3d.size()),
                                                static_cast<Eigen::Index>(tracks2d.size()));
  for (std::size_t t = 0; t < frames; ++t) {
    if (!attempted[t]) continue;
    ++result.diagnostics.opt_match_calls;
    if (!per_frame[t]) {
      ++result.diagnostics.failed_frames;
      result.diagnostics.skipped_frames.push_back(t);
      continue;
    }
    const OptMatchResult& r = *per_frame[t];
    // The frame's whole-match score, mapped to a positive vote shared by its pairs.
    const double mean_cost = -r.score / static_cast<double>(std::max<std::size_t>(1, r.scored_pairs));
    const double vote = 1.0 / (1.0 + mean_cost);
    for (const auto& p : r.match.pairs)
      votes(static_cast<Eigen::Index>(p.idx3d), static_cast<Eigen::Index>(p.idx2d)) += vote;
  }

  result.match = hungarian(CostMatrix{votes, Orientation::kMaximize});
  std::erase_if(result.match.pairs, [&](const MatchPair& p) {
    return votes(static_cast<Eigen::Index>(p.idx3d), static_cast<Eigen::Index>(p.idx2d)) <= 0.0;
  });
  for (auto& p : result.match.pairs) p.residual.reset();
  result.match.complete(tracks3d.size(), tracks2d.size());
  const ExtrinsicsTrack raw = finalize_sequence_match(tracks3d, tracks2d, k, config, result.match);
  result.extrinsics = smooth_extrinsics(raw, config.smoothing_window);
  return result;
}

}  // namespace xalign
