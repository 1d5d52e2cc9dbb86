#pragma once

#include <vector>

#include "xalign/geometry.hpp"

namespace xalign {

struct CameraObservation {
  Intrinsics intrinsics;
  Extrinsics extrinsics;
  Joints2 joints2d;
  JointWeights confidence{};  // 0 = joint not observed
};

struct RefineWeights {
  double lambda1 = 1.0;   // anchor to the input 3D joints, m^2
  double lambda2 = 1.0;   // confidence-weighted 2D term, px^2
  double lambda3 = 0.01;  // unweighted reprojection term, px^2

  friend bool operator==(const RefineWeights&, const RefineWeights&) = default;
};

struct RefineProblem {
  Joints3 initial3d;
  std::vector<CameraObservation> observations;
  RefineWeights weights;

  // Throws InvalidConfig.
  void validate() const;
};

struct RefineResult {
  Joints3 refined3d;
  // Objective at the start and after each accepted step.
  std::vector<double> objective_trace;
  bool converged = false;
  int iterations = 0;
};

inline constexpr int kRefineMaxIterations = 50;

double objective(const RefineProblem& problem, const Joints3& candidate);
// d objective / d candidate. Joints behind a camera pay a constant penalty there and get no gradient from it.
Joints3 objective_gradient(const RefineProblem& problem, const Joints3& candidate);

// Levenberg-Marquardt over the 72 joint coordinates (block-diagonal normal equations,
// one 3x3 block per joint, shared damping). Returns the best iterate; converged is
// false when the iteration cap was reached first.
RefineResult refine(const RefineProblem& problem);

}  // namespace xalign
