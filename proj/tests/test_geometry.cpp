#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "test_support.hpp"
#include "xalign/errors.hpp"
#include "xalign/geometry.hpp"

using namespace xalign;
using namespace xalign::testing;

TEST_CASE("project: axis-aligned pinhole") {
  const Intrinsics k{100.0, 100.0, 0.0, 0.0, 200.0, 200.0};
  const ProjectionMatrix p(k, Extrinsics::identity());
  const Vec2 px = p.project(Vec3(1.0, 0.0, 1.0));
  CHECK(px.x() == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(px.y() == doctest::Approx(0.0));
}

TEST_CASE("project: optical axis maps to the principal point") {
  const Intrinsics k = hd_camera();
  const ProjectionMatrix p(k, Extrinsics::identity());
  for (double z : {0.5, 3.0, 120.0}) {
    const Vec2 px = p.project(Vec3(0.0, 0.0, z));
    CHECK(px.x() == doctest::Approx(k.cx));
    CHECK(px.y() == doctest::Approx(k.cy));
  }
}

TEST_CASE("project: matches the explicit matrix-product oracle") {
  std::mt19937_64 rng(11);
  const Intrinsics k = hd_camera();
  for (int trial = 0; trial < 200; ++trial) {
    const Extrinsics m = random_extrinsics(rng);
    const Vec3 x = random_vec3(rng, -1.0, 1.0);
    const Vec2 got = ProjectionMatrix(k, m).project(x);
    const Vec2 want = oracle_project(k, m, x);
    CHECK((got - want).norm() < 1e-10);
  }
}

TEST_CASE("project: invariant under scaling of the homogeneous matrix") {
  std::mt19937_64 rng(12);
  const Intrinsics k = hd_camera();
  const Extrinsics m = random_extrinsics(rng);
  const ProjectionMatrix p(k, m);
  const ProjectionMatrix scaled(Mat34(p.matrix() * 3.7));
  for (const auto& x : random_cloud(rng, 20)) {
    CHECK((p.project(x) - scaled.project(x)).norm() < 1e-9);
    CHECK(p.depth(x) == doctest::Approx(scaled.depth(x)));
  }
}

TEST_CASE("project: points at or behind the camera are rejected") {
  const ProjectionMatrix p(hd_camera(), Extrinsics::identity());
  CHECK_THROWS_AS(p.project(Vec3(0.0, 0.0, 0.0)), NonPositiveDepth);
  CHECK_THROWS_AS(p.project(Vec3(1.0, 1.0, -2.0)), NonPositiveDepth);
  CHECK_FALSE(p.try_project(Vec3(0.0, 0.0, 1e-7)).has_value());
  const std::vector<Vec3> pts{Vec3(0, 0, 1), Vec3(0, 0, -1)};
  CHECK_THROWS_AS(project(p, pts), NonPositiveDepth);
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(hd_camera().validate());
  CHECK_THROWS_AS((Intrinsics{0.0, 1.0, 1.0, 1.0, 2.0, 2.0}.validate()), InvalidConfig);
  CHECK_THROWS_AS((Intrinsics{1.0, 1.0, 3.0, 1.0, 2.0, 2.0}.validate()), InvalidConfig);
}

namespace {

std::vector<Vec2> project_all(const Intrinsics& k, const Extrinsics& m, const std::vector<Vec3>& pts) {
  return project(ProjectionMatrix(k, m), pts);
}

}  // namespace

TEST_CASE("solve_pnp: identity recovery") {
  std::mt19937_64 rng(21);
  const Intrinsics k = hd_camera();
  std::vector<Vec3> pts = random_cloud(rng, 24);
  for (auto& x : pts) x.z() += 5.0;
  const auto px = project_all(k, Extrinsics::identity(), pts);
  const PnpResult r = solve_pnp(pts, px, k);
  CHECK(geodesic_rotation_error(r.extrinsics.rotation, Mat3::Identity()) < 1e-6);
  CHECK(r.extrinsics.translation.norm() < 1e-6);
  CHECK(is_rotation(r.extrinsics.rotation));
}

TEST_CASE("solve_pnp: noiseless random poses are recovered") {
  std::mt19937_64 rng(22);
  const Intrinsics k = hd_camera();
  for (int trial = 0; trial < 50; ++trial) {
    const Extrinsics truth = random_extrinsics(rng);
    const auto pts = random_cloud(rng, 24);
    const PnpResult r = solve_pnp(pts, project_all(k, truth, pts), k);
    CHECK(geodesic_rotation_error(r.extrinsics.rotation, truth.rotation) < 1e-4);
    CHECK((r.extrinsics.translation - truth.translation).norm() < 1e-4);
  }
}

TEST_CASE("solve_pnp: residual under 1 px noise") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Intrinsics k = hd_camera();
  double rms_sum = 0.0;
  int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const Extrinsics truth = random_extrinsics(rng);
    const auto pts = random_cloud(rng, 24);
    auto px = project_all(k, truth, pts);
    for (auto& p : px) p += Vec2(noise(rng), noise(rng));
    const PnpResult r = solve_pnp(pts, px, k);
    // Least squares can only improve on the true pose.
    CHECK(r.rms * r.rms * 24.0 <= reprojection_objective(pts, px, k, truth) + 1e-9);
    rms_sum += r.rms;
  }
  CHECK(rms_sum / trials <= 1.5);
}

TEST_CASE("solve_pnp: accepted steps never increase the objective") {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> noise(0.0, 2.0);
  const Intrinsics k = hd_camera();
  for (int trial = 0; trial < 30; ++trial) {
    const Extrinsics truth = random_extrinsics(rng);
    const auto pts = random_cloud(rng, 12);
    auto px = project_all(k, truth, pts);
    for (auto& p : px) p += Vec2(noise(rng), noise(rng));
    Extrinsics start = truth;
    start.rotation = random_small_rotation(rng, 0.2) * truth.rotation;
    start.translation += random_vec3(rng, -0.3, 0.3);
    const PnpResult r = refine_pnp(pts, px, k, start);
    REQUIRE(r.objective_trace.size() >= 1);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  }
}

TEST_CASE("solve_pnp: coplanar points use the homography path") {
  std::mt19937_64 rng(25);
  const Intrinsics k = hd_camera();
  const Extrinsics truth = random_extrinsics(rng);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) {
    Vec3 x = random_vec3(rng, -1.0, 1.0);
    x.z() = 0.0;
    pts.push_back(x);
  }
  const auto px = project_all(k, truth, pts);
  const PnpResult r = solve_pnp(pts, px, k);
  CHECK(r.planar);
  CHECK(geodesic_rotation_error(r.extrinsics.rotation, truth.rotation) < 1e-6);
  CHECK((r.extrinsics.translation - truth.translation).norm() < 1e-6);

  const std::vector<Vec3> seven(pts.begin(), pts.begin() + 7);
  const std::vector<Vec2> seven_px(px.begin(), px.begin() + 7);
  CHECK_THROWS_AS(solve_pnp(seven, seven_px, k), InsufficientCorrespondences);
}

TEST_CASE("solve_pnp: error paths") {
  std::mt19937_64 rng(26);
  const Intrinsics k = hd_camera();
  const Extrinsics truth = random_extrinsics(rng);
  const auto pts = random_cloud(rng, 5);
  CHECK_THROWS_AS(solve_pnp(pts, project_all(k, truth, pts), k), InsufficientCorrespondences);

  // Non-finite correspondences are filtered before counting.
  auto many = random_cloud(rng, 7);
  auto px = project_all(k, truth, many);
  px[0] = Vec2(std::nan(""), 0.0);
  px[1] = Vec2(std::nan(""), 0.0);
  CHECK_THROWS_AS(solve_pnp(many, px, k), InsufficientCorrespondences);

  // Collinear points leave the pose unidentifiable.
  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i) line.push_back(Vec3(0.1 * i, 0.0, 0.0));
  CHECK_THROWS_AS(solve_pnp(line, project_all(k, truth, line), k), DegenerateConfiguration);
}

namespace {

// Walks the chain root -> joint and multiplies transforms one link at a time.
Vec3 oracle_joint(const CanonicalSkeleton& s, const BodyPose& pose, const Vec3& root, std::size_t joint) {
  std::vector<std::size_t> chain;
  for (int j = static_cast<int>(joint); j >= 0; j = s.parents()[static_cast<std::size_t>(j)])
    chain.insert(chain.begin(), static_cast<std::size_t>(j));
  Mat3 rot = Mat3::Identity();
  Vec3 pos = root;
  for (std::size_t link = 0; link < chain.size(); ++link) {
    if (link > 0) pos = pos + rot * s.offsets()[chain[link]];
    rot = rot * pose.rotations[chain[link]];
  }
  return pos;
}

}  // namespace

TEST_CASE("forward_kinematics: rest pose") {
  const auto& s = CanonicalSkeleton::builtin();
  const Vec3 root(1.0, -2.0, 0.95);
  const Joints3 j = forward_kinematics(s, BodyPose::identity(), root);
  const Joints3 rest = s.rest_positions();
  for (std::size_t i = 0; i < kJointCount; ++i) CHECK((j[i] - (root + rest[i])).norm() < 1e-12);
  CHECK(j[0] == root);
}

TEST_CASE("forward_kinematics: half turn of the root about the vertical axis") {
  const auto& s = CanonicalSkeleton::builtin();
  const Vec3 root(0.5, 0.25, 0.95);
  BodyPose pose;
  pose.rotations[0] = rotation_z(M_PI);
  const Joints3 j = forward_kinematics(s, pose, root);
  const Joints3 rest = s.rest_positions();
  for (std::size_t i = 1; i < kJointCount; ++i) {
    const Vec3 want = root + Vec3(-rest[i].x(), -rest[i].y(), rest[i].z());
    CHECK((j[i] - want).norm() < 1e-12);
  }
}

TEST_CASE("forward_kinematics: matches the recursive chain oracle") {
  std::mt19937_64 rng(31);
  const auto& s = CanonicalSkeleton::builtin();
  for (int trial = 0; trial < 50; ++trial) {
    const BodyPose pose = random_body_pose(rng);
    const Vec3 root = random_vec3(rng, -5.0, 5.0);
    const Joints3 j = forward_kinematics(s, pose, root);
    for (std::size_t i = 0; i < kJointCount; ++i) CHECK((j[i] - oracle_joint(s, pose, root, i)).norm() < 1e-10);
  }
}

TEST_CASE("forward_kinematics: rigid equivariance") {
  std::mt19937_64 rng(32);
  const auto& s = CanonicalSkeleton::builtin();
  for (int trial = 0; trial < 20; ++trial) {
    const BodyPose pose = random_body_pose(rng);
    const Vec3 root = random_vec3(rng, -3.0, 3.0);
    const Mat3 g = random_rotation(rng);
    const Vec3 shift = random_vec3(rng, -3.0, 3.0);
    BodyPose moved = pose;
    moved.rotations[0] = g * pose.rotations[0];
    const Joints3 a = forward_kinematics(s, pose, root);
    const Joints3 b = forward_kinematics(s, moved, g * root + shift);
    for (std::size_t i = 0; i < kJointCount; ++i) CHECK((b[i] - (g * a[i] + shift)).norm() < 1e-9);
  }
}

TEST_CASE("geodesic_rotation_error") {
  CHECK(geodesic_rotation_error(Mat3::Identity(), Mat3::Identity()) == 0.0);
  CHECK(geodesic_rotation_error(Mat3::Identity(), rotation_z(M_PI / 2)) == doctest::Approx(M_PI / 2).epsilon(1e-14));
  CHECK(geodesic_rotation_error(Mat3::Identity(), rotation_x(M_PI)) == doctest::Approx(M_PI));

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 a = random_rotation(rng);
    const Mat3 b = random_rotation(rng);
    const Eigen::Quaterniond qa(a), qb(b);
    const double oracle = 2.0 * std::acos(std::min(1.0, std::abs(qa.dot(qb))));
    CHECK(std::abs(geodesic_rotation_error(a, b) - oracle) < 1e-9);
  }
}

TEST_CASE("rotation helpers round trip") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 r = random_rotation(rng);
    CHECK((rotation_from_vector(rotation_to_vector(r)) - r).norm() < 1e-9);
    const Eigen::Vector4d q = rotation_to_quaternion(r);
    CHECK(q[0] >= 0.0);
    CHECK(std::abs(q.norm() - 1.0) < 1e-12);
    CHECK((quaternion_to_rotation(q) - r).norm() < 1e-12);
  }
}

TEST_CASE("canonical skeleton") {
  const auto& s = CanonicalSkeleton::builtin();
  CHECK(s.version() == 1);
  CHECK(s.names()[0] == "pelvis");
  CHECK(s.parents()[0] == -1);
  CHECK(s.content_hash().size() == 16);

  const Joints3 rest = s.rest_positions();
  const double ankle_to_head = rest[15].z() - rest[7].z();
  // Ankles sit 0.07 m above the ground, the crown 0.16 m above the head joint.
  CHECK(ankle_to_head + 0.07 + 0.16 == doctest::Approx(1.70));

  // Whitespace and comments do not change the content hash.
  std::string text = "# comment\nskeleton 1\n";
  for (std::size_t i = 0; i < kJointCount; ++i) {
    text += s.names()[i] + "   " + std::to_string(s.parents()[i]);
    for (int a = 0; a < 3; ++a) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.3f", s.offsets()[i][a]);
      text += buf;
    }
    text += "\n";
  }
  CHECK(CanonicalSkeleton::parse(text).content_hash() == s.content_hash());

  CHECK_THROWS_AS(CanonicalSkeleton::parse("skeleton 1\npelvis -1 0 0 0\n"), InvalidConfig);
  CHECK_THROWS_AS(CanonicalSkeleton::parse("pelvis -1 0 0 0\n"), InvalidConfig);
  std::string cyclic = text;
  cyclic.replace(cyclic.find("left_hip   0"), 12, "left_hip   5");
  CHECK_THROWS_AS(CanonicalSkeleton::parse(cyclic), InvalidConfig);
}
