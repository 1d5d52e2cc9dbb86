#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "xalign/errors.hpp"
#include "xalign/geometry.hpp"

namespace xalign {
namespace {

using Mat4 = Eigen::Matrix4d;

// Similarity that moves the centroid to the origin and the mean distance to sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> normalizing_transform(const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> centroid = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) throw DegenerateConfiguration("PnP: all points coincide");
  const double s = std::sqrt(static_cast<double>(Dim)) / mean_dist;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= s;
  t.template topRightCorner<Dim, 1>() = -s * centroid;
  return t;
}

// Eigenvector of the smallest eigenvalue of A^T A; rejects a multi-dimensional null space.
template <int N>
Eigen::Matrix<double, N, 1> null_vector(const Eigen::Matrix<double, N, N>& ata) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> eig(ata);
  const auto& ev = eig.eigenvalues();
  if (!(ev[N - 1] > 0.0) || ev[1] <= 1e-13 * ev[N - 1])
    throw DegenerateConfiguration("PnP: rank-deficient linear system");
  return eig.eigenvectors().col(0);
}

Extrinsics from_scaled_projection(Mat34 p, const std::vector<Vec3>& points3d) {
  Vec3 centroid = Vec3::Zero();
  for (const auto& x : points3d) centroid += x;
  centroid /= static_cast<double>(points3d.size());
  if (p.row(2).head<3>().dot(centroid) + p(2, 3) < 0.0) p = -p;
  const Eigen::JacobiSVD<Mat3> svd(p.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = svd.singularValues().mean();
  if (!(scale > 0.0)) throw DegenerateConfiguration("PnP: zero-scale projection");
  Extrinsics m;
  m.rotation = nearest_rotation(p.leftCols<3>());
  m.translation = p.col(3) / scale;
  return m;
}

Extrinsics dlt_initialization(const std::vector<Vec3>& points3d, const std::vector<Vec2>& normalized2d) {
  const auto t3 = normalizing_transform<3>(points3d);
  const auto t2 = normalizing_transform<2>(normalized2d);
  Eigen::Matrix<double, 12, 12> ata = Eigen::Matrix<double, 12, 12>::Zero();
  for (std::size_t i = 0; i < points3d.size(); ++i) {
    const Eigen::Vector4d x = t3 * points3d[i].homogeneous();
    const Eigen::Vector3d u = t2 * normalized2d[i].homogeneous();
    Eigen::Matrix<double, 2, 12> a = Eigen::Matrix<double, 2, 12>::Zero();
    a.block<1, 4>(0, 0) = x.transpose();
    a.block<1, 4>(0, 8) = -u.x() * x.transpose();
    a.block<1, 4>(1, 4) = x.transpose();
    a.block<1, 4>(1, 8) = -u.y() * x.transpose();
    ata.noalias() += a.transpose() * a;
  }
  const Eigen::Matrix<double, 12, 1> v = null_vector<12>(ata);
  Mat34 pn;
  pn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8), v(9), v(10), v(11);
  const Mat34 p = t2.inverse() * pn * t3;
  return from_scaled_projection(p, points3d);
}

// Coplanar input: homography from plane coordinates to the normalized image plane.
Extrinsics homography_initialization(const std::vector<Vec3>& points3d, const std::vector<Vec2>& normalized2d,
                                     const Vec3& centroid, const Mat3& basis) {
  std::vector<Vec2> plane;
  plane.reserve(points3d.size());
  for (const auto& x : points3d) plane.push_back((basis.transpose() * (x - centroid)).head<2>());
  const auto ta = normalizing_transform<2>(plane);
  const auto tb = normalizing_transform<2>(normalized2d);
  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const Eigen::Vector3d a = ta * plane[i].homogeneous();
    const Eigen::Vector3d b = tb * normalized2d[i].homogeneous();
    Eigen::Matrix<double, 2, 9> row = Eigen::Matrix<double, 2, 9>::Zero();
    row.block<1, 3>(0, 0) = a.transpose();
    row.block<1, 3>(0, 6) = -b.x() * a.transpose();
    row.block<1, 3>(1, 3) = a.transpose();
    row.block<1, 3>(1, 6) = -b.y() * a.transpose();
    ata.noalias() += row.transpose() * row;
  }
  const Eigen::Matrix<double, 9, 1> h = null_vector<9>(ata);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 hm = tb.inverse() * hn * ta;
  double lambda = 2.0 / (hm.col(0).norm() + hm.col(1).norm());
  if (lambda * hm(2, 2) < 0.0) lambda = -lambda;
  Mat3 rp;
  rp.col(0) = lambda * hm.col(0);
  rp.col(1) = lambda * hm.col(1);
  rp.col(2) = rp.col(0).cross(rp.col(1));
  rp = nearest_rotation(rp);
  Extrinsics m;
  m.rotation = rp * basis.transpose();
  m.translation = lambda * hm.col(2) - m.rotation * centroid;
  return m;
}

}  // namespace

double reprojection_objective(std::span<const Vec3> points3d, std::span<const Vec2> points2d, const Intrinsics& k,
                              const Extrinsics& m) {
  double f = 0.0;
  for (std::size_t i = 0; i < points3d.size(); ++i) {
    const Vec3 c = m.to_camera(points3d[i]);
    if (!(c.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
    const double du = k.fx * c.x() / c.z() + k.cx - points2d[i].x();
    const double dv = k.fy * c.y() / c.z() + k.cy - points2d[i].y();
    f += du * du + dv * dv;
  }
  return f;
}

PnpResult refine_pnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d, const Intrinsics& k,
                     const Extrinsics& initial, const PnpOptions& options) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  PnpResult result;
  Extrinsics current = initial;
  double f = reprojection_objective(points3d, points2d, k, current);
  if (!std::isfinite(f)) throw DegenerateConfiguration("PnP: initial pose places points behind the camera");
  result.objective_trace.push_back(f);

  double mu = options.initial_damping;
  bool converged = f == 0.0;
  bool rebuild = true;
  Mat6 h;
  Vec6 g;
  int iter = 0;
  while (!converged && iter < options.max_iterations) {
    ++iter;
    if (rebuild) {
      h.setZero();
      g.setZero();
      for (std::size_t i = 0; i < points3d.size(); ++i) {
        const Vec3 rx = current.rotation * points3d[i];
        const Vec3 c = rx + current.translation;
        const double iz = 1.0 / c.z();
        const Eigen::Vector2d r(k.fx * c.x() * iz + k.cx - points2d[i].x(), k.fy * c.y() * iz + k.cy - points2d[i].y());
        Eigen::Matrix<double, 2, 3> dproj;
        dproj << k.fx * iz, 0.0, -k.fx * c.x() * iz * iz, 0.0, k.fy * iz, -k.fy * c.y() * iz * iz;
        Eigen::Matrix<double, 2, 6> j;
        j.leftCols<3>() = -dproj * skew(rx);
        j.rightCols<3>() = dproj;
        h.noalias() += j.transpose() * j;
        g.noalias() += j.transpose() * r;
      }
      if (!h.allFinite()) throw DegenerateConfiguration("PnP: non-finite normal equations");
      rebuild = false;
    }
    Mat6 damped = h;
    const double floor = 1e-12 * h.diagonal().maxCoeff();
    for (int d = 0; d < 6; ++d) damped(d, d) += mu * std::max(h(d, d), floor);
    const Eigen::LDLT<Mat6> ldlt(damped);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw DegenerateConfiguration("PnP: rank-deficient normal equations");
    const Vec6 step = -ldlt.solve(g);

    Extrinsics candidate;
    candidate.rotation = rotation_from_vector(step.head<3>()) * current.rotation;
    candidate.translation = current.translation + step.tail<3>();
    const double f_new = reprojection_objective(points3d, points2d, k, candidate);
    if (f_new < f) {
      const double decrease = (f - f_new) / f;
      current = candidate;
      f = f_new;
      result.objective_trace.push_back(f);
      mu = std::max(mu * 0.1, 1e-15);
      rebuild = true;
      if (decrease < options.relative_tolerance || f == 0.0) converged = true;
    } else {
      mu *= 10.0;
      // No step direction decreases the objective any more: stationary point.
      if (mu > 1e12) converged = true;
    }
  }
  if (!converged) throw NoConvergence("PnP: refinement exceeded " + std::to_string(options.max_iterations) + " iterations");

  current.rotation = nearest_rotation(current.rotation);
  result.extrinsics = current;
  result.iterations = iter;
  result.rms = std::sqrt(f / static_cast<double>(points3d.size()));
  return result;
}

PnpResult solve_pnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d, const Intrinsics& k,
                    const PnpOptions& options) {
  if (points3d.size() != points2d.size())
    throw InsufficientCorrespondences("PnP: 3D and 2D point counts differ");
  std::vector<Vec3> pts3;
  std::vector<Vec2> pts2;
  std::vector<Vec2> pix;
  pts3.reserve(points3d.size());
  pts2.reserve(points3d.size());
  pix.reserve(points3d.size());
  for (std::size_t i = 0; i < points3d.size(); ++i) {
    if (!points3d[i].allFinite() || !points2d[i].allFinite()) continue;
    pts3.push_back(points3d[i]);
    pix.push_back(points2d[i]);
    pts2.push_back(k.normalize(points2d[i]));
  }
  if (pts3.size() < kMinPnpPoints)
    throw InsufficientCorrespondences("PnP: need at least 6 valid correspondences, got " + std::to_string(pts3.size()));

  Vec3 centroid = Vec3::Zero();
  for (const auto& x : pts3) centroid += x;
  centroid /= static_cast<double>(pts3.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& x : pts3) cov.noalias() += (x - centroid) * (x - centroid).transpose();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const double n = static_cast<double>(pts3.size());
  const double off_plane_rms = std::sqrt(std::max(eig.eigenvalues()[0], 0.0) / n);
  const double spread = std::sqrt(std::max(eig.eigenvalues()[2], 0.0) / n);
  const bool planar = off_plane_rms < 1e-6 || off_plane_rms < 1e-6 * spread;

  Extrinsics init;
  if (planar) {
    if (pts3.size() < kMinPlanarPnpPoints)
      throw InsufficientCorrespondences("PnP: coplanar points need at least 8 correspondences");
    Mat3 basis;
    basis.col(0) = eig.eigenvectors().col(2);
    basis.col(1) = eig.eigenvectors().col(1);
    basis.col(2) = basis.col(0).cross(basis.col(1));
    init = homography_initialization(pts3, pts2, centroid, basis);
  } else {
    init = dlt_initialization(pts3, pts2);
  }
  PnpResult result = refine_pnp(pts3, pix, k, init, options);
  result.planar = planar;
  return result;
}

}  // namespace xalign
