#include <limits>
#include <map>

#include "projection_internal.hpp"
#include "xalign/errors.hpp"
#include "xalign/matching.hpp"

namespace xalign {
namespace {

using LocalPairs = std::vector<std::pair<std::size_t, std::size_t>>;

LocalPairs local_pairs_of(const MatchSet& m) {
  LocalPairs out;
  out.reserve(m.pairs.size());
  for (const auto& p : m.pairs) out.emplace_back(p.idx3d, p.idx2d);
  return out;
}

// Everything about one frame that does not depend on the candidate extrinsics.
class FrameProblem {
 public:
  FrameProblem(const FrameData& frame, const Intrinsics& k, const CanonicalSkeleton& skeleton)
      : frame_(frame), k_(k), penalty_(k.diagonal()) {
    const std::size_t na = frame.persons3d.size();
    const std::size_t nb = frame.persons2d.size();
    skeleton3d_.reserve(na);
    skeleton2d_.resize(na);
    for (std::size_t a = 0; a < na; ++a) {
      const auto& p3 = frame.persons3d[a];
      const Vec3& root = p3.joints[0];
      skeleton3d_.push_back(forward_kinematics(skeleton, p3.pose, root));
      skeleton2d_[a].reserve(nb);
      for (std::size_t b = 0; b < nb; ++b)
        skeleton2d_[a].push_back(
            forward_kinematics(skeleton, detail::with_root_of(frame.persons2d[b].pose, p3.pose), root));
    }
  }

  std::size_t n3d() const { return frame_.persons3d.size(); }
  std::size_t n2d() const { return frame_.persons2d.size(); }

  // Reprojection cost of every 3D person against every 2D person.
  Eigen::MatrixXd reprojection_matrix(const Extrinsics& m) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n3d()), static_cast<Eigen::Index>(n2d()));
    for (std::size_t a = 0; a < n3d(); ++a) {
      const auto projected = detail::project_joints(frame_.persons3d[a].joints, m, k_);
      for (std::size_t b = 0; b < n2d(); ++b) {
        const auto& p2 = frame_.persons2d[b];
        out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            detail::weighted_distance(projected, p2.joints, p2.confidence, penalty_);
      }
    }
    return out;
  }

  // Reprojection plus lambda0 times the body-pose term.
  Eigen::MatrixXd weighted_matrix(const Extrinsics& m, double lambda0) const {
    Eigen::MatrixXd out = reprojection_matrix(m);
    for (std::size_t a = 0; a < n3d(); ++a) {
      const auto fk3 = detail::project_joints(skeleton3d_[a], m, k_);
      for (std::size_t b = 0; b < n2d(); ++b) {
        const auto fk2 = detail::project_joints(skeleton2d_[a][b], m, k_);
        out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
            lambda0 * detail::mean_distance(fk3, fk2, penalty_);
      }
    }
    return out;
  }

  std::optional<Extrinsics> pose_for(const LocalPairs& pairs) const {
    try {
      return solve_pnp_for_pairs(frame_, pairs, k_).extrinsics;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  }

  const FrameData& frame() const { return frame_; }

 private:
  const FrameData& frame_;
  const Intrinsics& k_;
  double penalty_;
  std::vector<Joints3> skeleton3d_;
  std::vector<std::vector<Joints3>> skeleton2d_;
};

double sum_over(const Eigen::MatrixXd& q, const LocalPairs& pairs) {
  double s = 0.0;
  for (const auto& [a, b] : pairs) s += q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return s;
}

LocalPairs assign_max(const Eigen::MatrixXd& q) {
  return local_pairs_of(hungarian(CostMatrix{q, Orientation::kMaximize}));
}

struct Evaluation {
  bool ok = false;
  double score = 0.0;
  Extrinsics extrinsics;
  LocalPairs next;
};

}  // namespace

OptMatchResult opt_match(const FrameData& frame, const Intrinsics& k, const PcmConfig& config,
                         const CanonicalSkeleton& skeleton) {
  if (frame.persons3d.empty() || frame.persons2d.empty())
    throw NoViableProposal("OptMatch: no persons on one side of the frame");
  const FrameProblem problem(frame, k, skeleton);

  // Seeds: a pose from each single pair under identity matching.
  std::vector<LocalPairs> proposals;
  for (std::size_t a = 0; a < problem.n3d(); ++a) {
    for (std::size_t b = 0; b < problem.n2d(); ++b) {
      const auto m = problem.pose_for({{a, b}});
      if (!m) continue;
      LocalPairs proposal = assign_max(-problem.reprojection_matrix(*m));
      // Refining a duplicate replays an identical chain; keep the first.
      if (std::find(proposals.begin(), proposals.end(), proposal) == proposals.end())
        proposals.push_back(std::move(proposal));
    }
  }
  if (proposals.empty()) throw NoViableProposal("OptMatch: every seed PnP failed");

  std::map<LocalPairs, Evaluation> memo;
  auto evaluate = [&](const LocalPairs& c) -> const Evaluation& {
    auto it = memo.find(c);
    if (it != memo.end()) return it->second;
    Evaluation ev;
    if (const auto m = problem.pose_for(c)) {
      const Eigen::MatrixXd q = -problem.weighted_matrix(*m, config.lambda0);
      ev.ok = true;
      ev.extrinsics = *m;
      ev.score = sum_over(q, c);
      ev.next = assign_max(q);
    }
    return memo.emplace(c, std::move(ev)).first->second;
  };

  OptMatchResult result;
  result.proposals = proposals.size();
  double best = -std::numeric_limits<double>::infinity();
  LocalPairs best_pairs;
  Extrinsics best_extrinsics;
  for (const auto& start : proposals) {
    LocalPairs c = start;
    for (int iter = 0; iter < config.n_iter; ++iter) {
      const Evaluation& ev = evaluate(c);
      if (!ev.ok) break;
      if (ev.score > best) {
        best = ev.score;
        best_pairs = c;
        best_extrinsics = ev.extrinsics;
      }
      result.best_score_trace.push_back(best);
      c = ev.next;
    }
  }
  if (best_pairs.empty()) throw NoViableProposal("OptMatch: no proposal admitted a pose");

  result.score = best;
  result.scored_pairs = best_pairs.size();
  result.extrinsics = best_extrinsics;

  // Drop pairs with large reprojection error and re-solve from the survivors.
  const double threshold = config.reject_threshold_px(k);
  Eigen::MatrixXd residual = problem.reprojection_matrix(best_extrinsics);
  LocalPairs kept;
  for (const auto& [a, b] : best_pairs)
    if (residual(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) <= threshold) kept.emplace_back(a, b);
  if (!kept.empty() && kept.size() < best_pairs.size()) {
    if (const auto m = problem.pose_for(kept)) {
      result.extrinsics = *m;
      residual = problem.reprojection_matrix(*m);
    }
  }
  for (const auto& [a, b] : kept)
    result.match.pairs.push_back({frame.persons3d[a].track, frame.persons2d[b].track,
                                  residual(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});
  result.match.complete(frame.n3d, frame.n2d);
  return result;
}

}  // namespace xalign
