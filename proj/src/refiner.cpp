#include "xalign/refiner.hpp"

#include <cmath>

#include "xalign/errors.hpp"

namespace xalign {
namespace {

struct JointTerm {
  bool in_front = false;
  Vec2 residual = Vec2::Zero();
  Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero();
};

JointTerm joint_term(const CameraObservation& obs, const Vec3& x, std::size_t j) {
  JointTerm out;
  const Vec3 c = obs.extrinsics.to_camera(x);
  if (!(c.z() > kMinDepth)) return out;
  const Intrinsics& k = obs.intrinsics;
  const double iz = 1.0 / c.z();
  out.in_front = true;
  out.residual = Vec2(k.fx * c.x() * iz + k.cx, k.fy * c.y() * iz + k.cy) - obs.joints2d[j];
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx * iz, 0.0, -k.fx * c.x() * iz * iz, 0.0, k.fy * iz, -k.fy * c.y() * iz * iz;
  out.jacobian = dproj * obs.extrinsics.rotation;
  return out;
}

double joint_weight(const RefineWeights& w, double confidence) { return w.lambda2 * confidence + w.lambda3; }

double joint_objective(const RefineProblem& problem, const Vec3& x, std::size_t j) {
  double f = problem.weights.lambda1 * (x - problem.initial3d[j]).squaredNorm();
  for (const auto& obs : problem.observations) {
    const double conf = obs.confidence[j];
    if (!(conf > 0.0)) continue;
    const JointTerm term = joint_term(obs, x, j);
    const double penalty = obs.intrinsics.diagonal();
    const double sq = term.in_front ? term.residual.squaredNorm() : penalty * penalty;
    f += joint_weight(problem.weights, conf) * sq;
  }
  return f;
}

}  // namespace

void RefineProblem::validate() const {
  for (double w : {weights.lambda1, weights.lambda2, weights.lambda3})
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidConfig("refine: weights must be finite and >= 0");
  for (const auto& x : initial3d)
    if (!x.allFinite()) throw InvalidConfig("refine: non-finite initial joint");
  for (const auto& obs : observations) {
    obs.intrinsics.validate();
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (!(obs.confidence[j] >= 0.0) || !std::isfinite(obs.confidence[j]))
        throw InvalidConfig("refine: confidence must be finite and >= 0");
      if (obs.confidence[j] > 0.0 && !obs.joints2d[j].allFinite())
        throw InvalidConfig("refine: non-finite observed joint");
    }
  }
}

double objective(const RefineProblem& problem, const Joints3& candidate) {
  double f = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) f += joint_objective(problem, candidate[j], j);
  return f;
}

Joints3 objective_gradient(const RefineProblem& problem, const Joints3& candidate) {
  Joints3 g;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    g[j] = 2.0 * problem.weights.lambda1 * (candidate[j] - problem.initial3d[j]);
    for (const auto& obs : problem.observations) {
      const double conf = obs.confidence[j];
      if (!(conf > 0.0)) continue;
      const JointTerm term = joint_term(obs, candidate[j], j);
      if (!term.in_front) continue;
      g[j] += 2.0 * joint_weight(problem.weights, conf) * term.jacobian.transpose() * term.residual;
    }
  }
  return g;
}

RefineResult refine(const RefineProblem& problem) {
  problem.validate();
  RefineResult result;
  Joints3 current = problem.initial3d;
  double f = objective(problem, current);
  result.objective_trace.push_back(f);

  double mu = 1e-3;
  bool converged = f == 0.0;
  int iter = 0;
  std::array<Mat3, kJointCount> h;
  Joints3 g;
  bool rebuild = true;
  while (!converged && iter < kRefineMaxIterations) {
    ++iter;
    if (rebuild) {
      for (std::size_t j = 0; j < kJointCount; ++j) {
        h[j] = 2.0 * problem.weights.lambda1 * Mat3::Identity();
        g[j] = 2.0 * problem.weights.lambda1 * (current[j] - problem.initial3d[j]);
        for (const auto& obs : problem.observations) {
          const double conf = obs.confidence[j];
          if (!(conf > 0.0)) continue;
          const JointTerm term = joint_term(obs, current[j], j);
          if (!term.in_front) continue;
          const double w = 2.0 * joint_weight(problem.weights, conf);
          h[j].noalias() += w * term.jacobian.transpose() * term.jacobian;
          g[j].noalias() += w * term.jacobian.transpose() * term.residual;
        }
      }
      rebuild = false;
    }
    Joints3 candidate = current;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      Mat3 damped = h[j];
      const double floor = 1e-12 * std::max(1.0, h[j].diagonal().maxCoeff());
      for (int d = 0; d < 3; ++d) damped(d, d) += mu * std::max(h[j](d, d), floor);
      // A joint with no terms at all (all weights zero) has a zero block and stays put.
      if (damped.isZero(0.0)) continue;
      const Eigen::LDLT<Mat3> ldlt(damped);
      if (ldlt.info() != Eigen::Success) continue;
      candidate[j] = current[j] - ldlt.solve(g[j]);
    }
    const double f_new = objective(problem, candidate);
    if (f_new < f) {
      const double decrease = (f - f_new) / f;
      current = candidate;
      f = f_new;
      result.objective_trace.push_back(f);
      mu = std::max(mu * 0.1, 1e-15);
      rebuild = true;
      if (decrease < 1e-10 || f == 0.0) converged = true;
    } else {
      mu *= 10.0;
      if (mu > 1e12) converged = true;
    }
  }
  result.refined3d = current;
  result.converged = converged;
  result.iterations = iter;
  return result;
}

}  // namespace xalign
