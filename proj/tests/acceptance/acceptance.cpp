// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--expect-fail N]...
//
// Exits 0 when the set of failing criteria equals the --expect-fail set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "../oracles.hpp"
#include "../test_support.hpp"
#include "xalign/commands.hpp"
#include "xalign/harness.hpp"
#include "xalign/io.hpp"
#include "xalign/refiner.hpp"
#include "xalign/simulator.hpp"

using namespace xalign;
using namespace xalign::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::vector<std::pair<std::size_t, std::size_t>> sorted_pairs(const MatchSet& m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : m.pairs) out.emplace_back(p.idx3d, p.idx2d);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1. Hungarian equals brute force on 500 random matrices.
Outcome assignment_optimality() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> dim(0, 8);
  std::uniform_int_distribution<int> value(-50, 200);
  int agree = 0, trials = 0;
  while (trials < 500) {
    const int r = dim(rng), c = dim(rng);
    if (std::min(r, c) > 6) continue;
    ++trials;
    CostMatrix m;
    m.values.resize(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m.values(i, j) = value(rng);
    m.orientation = trials % 3 == 0 ? Orientation::kMaximize : Orientation::kMinimize;
    const MatchSet got = hungarian(m);
    const auto want = brute_force_assignment(m.values, m.orientation == Orientation::kMaximize);
    const bool full = got.pairs.size() == static_cast<std::size_t>(std::min(r, c));
    agree += full && got.is_injective() && assignment_total(m, got) == want.total;
  }
  const double t = seconds_since(start);
  return {agree == 500 && t < 10.0, fmt("%d/500 exact totals, %.2f s (limit 10 s)", agree, t)};
}

// 2. PnP recovers noiseless poses.
Outcome pnp_inverse() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1002);
  const Intrinsics k = hd_camera();
  int ok = 0;
  double worst_rot = 0.0, worst_trans = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Extrinsics m = random_extrinsics(rng);
    const auto pts = random_cloud(rng, 24);
    std::vector<Vec2> px;
    for (const auto& x : pts) px.push_back(oracle_project(k, m, x));
    try {
      const Extrinsics got = solve_pnp(pts, px, k).extrinsics;
      const double rot = geodesic_rotation_error(got.rotation, m.rotation);
      const double trans = (got.translation - m.translation).norm();
      worst_rot = std::max(worst_rot, rot);
      worst_trans = std::max(worst_trans, trans);
      ok += rot < 1e-4 && trans < 1e-4;
    } catch (const std::exception&) {
    }
  }
  const double t = seconds_since(start);
  return {ok == 200 && t < 30.0,
          fmt("%d/200 recovered, worst %.2e rad / %.2e m, %.2f s (limit 30 s)", ok, worst_rot, worst_trans, t)};
}

// 3. OptMatch equals exhaustive search on noiseless 3-person frames.
Outcome optmatch_optimality() {
  int agree = 0, scenes = 0;
  for (std::uint64_t seed = 0; scenes < 100 && seed < 1000; ++seed) {
    SceneConfig c;
    c.person_count = 3;
    c.frames = 8;
    c.seed = 30000 + seed;
    const Scene s = generate(c);
    const auto ref = reference_frame(s.tracks3d, s.tracks2d[0]);
    if (!ref) continue;
    const FrameData f = frame_data(s.tracks3d, s.tracks2d[0], *ref);
    if (f.persons3d.size() != 3 || f.persons2d.size() != 3) continue;
    ++scenes;
    try {
      const OptMatchResult r = opt_match(f, s.intrinsics, PcmConfig{});
      agree += sorted_pairs(r.match) == exhaustive_pairing(f, s.intrinsics, PcmConfig{}.lambda0);
    } catch (const std::exception&) {
    }
  }
  return {scenes == 100 && agree == 100, fmt("%d/%d agree with exhaustive search", agree, scenes)};
}

SceneConfig crowd_scene(std::uint64_t seed) {
  SceneConfig c;
  c.person_count = 10;
  c.frames = 32;
  c.pixel_noise_sigma = 2.0;
  c.dropout_rate = 0.2;
  c.moving_cameras = true;
  c.seed = seed;
  return c;
}

// 4. Full PCM accuracy on crowded moving-camera scenes.
Outcome pcm_accuracy() {
  const auto start = Clock::now();
  const ExecutionOptions exec{hardware_threads()};
  double sum = 0.0, worst = 1.0;
  std::size_t gated = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Scene s = generate(crowd_scene(40000 + seed));
    const PcmResult r = pcm(s.tracks3d, s.tracks2d[0], s.intrinsics, PcmConfig{}, exec);
    const double a = accuracy(r.match, s.truth, 0);
    sum += a;
    worst = std::min(worst, a);
    gated += r.diagnostics.keypoint_path;
  }
  const double mean = sum / 200.0;
  const double t = seconds_since(start);
  return {mean >= 0.95 && t < 300.0,
          fmt("mean accuracy %.4f (need >= 0.95), worst scene %.3f, key-point path in %zu/200, %.1f s (limit 300 s)",
              mean, worst, gated, t)};
}

// 5. Ablation ordering on synchronized-pose scenes.
Outcome ablation_ordering() {
  const ExecutionOptions exec{hardware_threads()};
  double pose = 0.0, temporal = 0.0, full = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneConfig c;
    c.person_count = 4;
    c.frames = 32;
    c.pixel_noise_sigma = 2.0;
    c.dropout_rate = 0.2;
    c.synchronized_pose_groups = {{0, 1}, {2, 3}};
    c.pose_noise_deg = 10.0;
    c.sync_deviation_deg = 5.0;
    c.seed = 50000 + seed;
    const Scene s = generate(c);
    pose += scene_accuracy(AblationMode::kPose, s, 0, PcmConfig{}, exec);
    temporal += scene_accuracy(AblationMode::kPoseTemporal, s, 0, PcmConfig{}, exec);
    full += scene_accuracy(AblationMode::kFull, s, 0, PcmConfig{}, exec);
  }
  pose /= 50.0;
  temporal /= 50.0;
  full /= 50.0;
  const bool pass = full >= temporal && temporal >= pose && full - pose >= 0.05;
  return {pass, fmt("P&T&K %.4f >= P&T %.4f >= Pose %.4f, gap %.1f pp (need >= 5)", full, temporal, pose,
                    100.0 * (full - pose))};
}

// 6. Variance gate boundary.
Outcome gate_boundary() {
  PcmConfig open;
  open.delta = std::numeric_limits<double>::infinity();
  PcmConfig closed;
  closed.delta = 0.0;
  int exact = 0, forced = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneConfig c = crowd_scene(60000 + seed);
    c.person_count = 2 + seed % 6;
    const Scene s = generate(c);
    const auto& t3 = s.tracks3d;
    const auto& t2 = s.tracks2d[0];
    const PcmResult a = pcm(t3, t2, s.intrinsics, open);
    const InitialMatch init = initial_match(t3, t2, s.intrinsics, open);
    exact += a.match == init.match && !a.diagnostics.keypoint_path && a.diagnostics.opt_match_calls == 0;
    const PcmResult b = pcm(t3, t2, s.intrinsics, closed);
    forced += b.diagnostics.keypoint_path && b.diagnostics.opt_match_calls > 0;
  }
  return {exact == 20 && forced == 20,
          fmt("delta=inf returns C_init bit-exactly in %d/20, delta=0 runs the key-point path in %d/20", exact, forced)};
}

// 7. Refiner gradient against central differences.
Outcome gradient_check() {
  std::mt19937_64 rng(1007);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  const double h = 1e-6;
  int ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Joints3 truth;
    for (auto& x : truth) x = random_vec3(rng, -0.6, 0.6);
    RefineProblem p;
    for (std::size_t j = 0; j < kJointCount; ++j) p.initial3d[j] = truth[j] + 0.05 * Vec3(noise(rng), noise(rng), noise(rng));
    const int cams = 1 + trial % 3;
    for (int c = 0; c < cams; ++c) {
      CameraObservation obs;
      obs.intrinsics = hd_camera();
      obs.extrinsics = random_extrinsics(rng);
      for (std::size_t j = 0; j < kJointCount; ++j) {
        obs.joints2d[j] = oracle_project(obs.intrinsics, obs.extrinsics, truth[j]) + 3.0 * Vec2(noise(rng), noise(rng));
        obs.confidence[j] = conf(rng) < 0.1 ? 0.0 : conf(rng);
      }
      p.observations.push_back(obs);
    }
    Joints3 x;
    for (std::size_t j = 0; j < kJointCount; ++j) x[j] = truth[j] + 0.03 * Vec3(noise(rng), noise(rng), noise(rng));
    const Joints3 g = objective_gradient(p, x);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < kJointCount; ++j)
      for (int a = 0; a < 3; ++a) {
        Joints3 xp = x, xm = x;
        xp[j][a] += h;
        xm[j][a] -= h;
        const double fd = (objective(p, xp) - objective(p, xm)) / (2.0 * h);
        num += (g[j][a] - fd) * (g[j][a] - fd);
        den += fd * fd;
      }
    const double rel = std::sqrt(num / den);
    worst = std::max(worst, rel);
    ok += rel < 1e-4;
  }
  return {ok == 50, fmt("%d/50 within 1e-4, worst relative error %.2e", ok, worst)};
}

// 8. More clean cameras help the refiner.
Outcome sensor_expandability() {
  double input = 0.0, two = 0.0;
  int not_worse = 0, trials = 0;
  auto mean_error = [](const Joints3& a, const Joints3& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < kJointCount; ++j) s += (a[j] - b[j]).norm();
    return s / static_cast<double>(kJointCount);
  };
  for (std::uint64_t seed = 0; trials < 100 && seed < 1000; ++seed) {
    SceneConfig c;
    c.person_count = 3;
    c.frames = 16;
    c.camera_count = 3;
    c.joint3d_noise_sigma = 0.05;
    c.seed = 80000 + seed;
    const Scene s = generate(c);
    // First person and frame seen by all three cameras.
    std::optional<std::pair<std::size_t, std::size_t>> pick;
    for (std::size_t t = s.truth.frame_count() / 2; !pick && t < s.truth.frame_count(); ++t)
      for (std::size_t p = 0; !pick && p < s.truth.person_count(); ++p)
        if (s.truth.visible[0][p][t] && s.truth.visible[1][p][t] && s.truth.visible[2][p][t]) pick = {{p, t}};
    if (!pick) continue;
    ++trials;
    const auto [p, t] = *pick;
    RefineProblem problem;
    problem.initial3d = s.tracks3d[p].joints[t];
    for (std::size_t cam = 0; cam < 3; ++cam) {
      const auto& track = s.tracks2d[cam][s.truth.index2d[cam][p]];
      problem.observations.push_back({s.intrinsics, s.truth.extrinsics[cam][t], track.joints[t], track.confidence[t]});
    }
    const Joints3& truth = s.truth.joints[p][t];
    RefineProblem with_two = problem;
    with_two.observations.pop_back();
    const double e_in = mean_error(problem.initial3d, truth);
    const double e_two = mean_error(refine(with_two).refined3d, truth);
    const double e_three = mean_error(refine(problem).refined3d, truth);
    input += e_in;
    two += e_two;
    not_worse += e_three <= e_two;
  }
  const double ratio = two / input;
  return {trials == 100 && ratio < 0.7 && not_worse >= 95,
          fmt("2 cameras: refined/input %.4f (need < 0.7) over %d trials; third camera not worse in %d/100 (need >= 95)",
              ratio, trials, not_worse)};
}

// 9. Byte-identical outputs across runs and thread counts.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "xalign_acceptance_determinism";
  fs::remove_all(root);
  AppConfig cfg;
  cfg.scene.person_count = 6;
  cfg.scene.camera_count = 3;
  cfg.scene.frames = 32;
  cfg.scene.pixel_noise_sigma = 2.0;
  cfg.scene.dropout_rate = 0.2;
  cfg.scene.seed = 9;
  std::ostringstream log;
  const std::vector<std::string> files{"lidar.jsonl", "camera_0.jsonl", "camera_1.jsonl", "camera_2.jsonl", "truth.json"};
  cmd_simulate(cfg, (root / "a").string(), log);
  cmd_simulate(cfg, (root / "b").string(), log);
  int same = 0, total = 0;
  for (const auto& f : files) {
    ++total;
    same += read_file((root / "a" / f).string()) == read_file((root / "b" / f).string());
  }
  std::vector<std::string> cams;
  for (int c = 0; c < 3; ++c) cams.push_back((root / "a" / ("camera_" + std::to_string(c) + ".jsonl")).string());
  const std::string lidar = (root / "a" / "lidar.jsonl").string();
  cmd_match(lidar, cams, cfg, (root / "m1").string(), {AblationMode::kFull, 1}, log);
  cmd_match(lidar, cams, cfg, (root / "m1b").string(), {AblationMode::kFull, 1}, log);
  cmd_match(lidar, cams, cfg, (root / "m4").string(), {AblationMode::kFull, 4}, log);
  for (int c = 0; c < 3; ++c) {
    const std::string name = "camera_" + std::to_string(c) + ".match.json";
    const std::string base = read_file((root / "m1" / name).string());
    total += 2;
    same += base == read_file((root / "m1b" / name).string());
    same += base == read_file((root / "m4" / name).string());
  }
  fs::remove_all(root);
  return {same == total, fmt("%d/%d output files byte-identical (simulate x2, match x2 at 1 thread, match at 4 threads)",
                             same, total)};
}

// 10. Throughput.
Outcome throughput() {
  const ExecutionOptions exec{hardware_threads()};
  auto fps_of = [&](AblationMode mode, std::size_t persons) {
    double sec = 0.0;
    std::size_t frames = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SceneConfig c = crowd_scene(100000 + seed);
      c.person_count = persons;
      const Scene s = generate(c);
      const auto start = Clock::now();
      if (is_single_frame(mode)) {
        for (std::size_t t = 0; t < c.frames; ++t)
          ablation_match(mode, s.tracks3d, s.tracks2d[0], s.intrinsics, PcmConfig{}, t, exec);
      } else {
        ablation_match(mode, s.tracks3d, s.tracks2d[0], s.intrinsics, PcmConfig{}, std::nullopt, exec);
      }
      sec += seconds_since(start);
      frames += c.frames;
    }
    return static_cast<double>(frames) / sec;
  };
  const double full10 = fps_of(AblationMode::kFull, 10);
  const double pose10 = fps_of(AblationMode::kPose, 10);
  const double kps3 = fps_of(AblationMode::kKeypointsExhaustive, 3);
  const double full3 = fps_of(AblationMode::kFull, 3);
  const bool rate = full10 >= 30.0;
  const bool order = pose10 > full10 && full10 > kps3;
  return {rate && order,
          fmt("(a) P&T&K@10 %.1f fps on %zu thread(s) (need >= 30): %s; (b) Pose@10 %.0f > P&T&K@10 %.1f > KPs@3 %.0f: "
              "%s (P&T&K@3 %.0f fps)",
              full10, exec.threads, rate ? "ok" : "no", pose10, full10, kps3, order ? "ok" : "no", full3)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expect_fail;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    const int n = std::stoi(argv[i + 1]);
    if (flag == "--only") only.insert(n);
    else if (flag == "--expect-fail") expect_fail.insert(n);
    else {
      std::cerr << "usage: acceptance [--only N]... [--expect-fail N]...\n";
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"assignment optimality", assignment_optimality},
      {"PnP inverse property", pnp_inverse},
      {"OptMatch optimality at n=3", optmatch_optimality},
      {"PCM accuracy", pcm_accuracy},
      {"ablation ordering", ablation_ordering},
      {"variance gate boundary", gate_boundary},
      {"refiner gradient check", gradient_check},
      {"sensor expandability", sensor_expandability},
      {"determinism", determinism},
      {"throughput", throughput},
  };
  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) failed.insert(n);
    std::cout << "criterion " << n << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
              << ")" << (!o.pass && expect_fail.count(n) ? " [known failure]" : "") << std::endl;
  }
  std::set<int> expected;
  for (int n : expect_fail)
    if (only.empty() || only.count(n)) expected.insert(n);
  if (failed != expected) {
    std::cout << "acceptance: failing criteria differ from the expected set\n";
    return 1;
  }
  std::cout << "acceptance: " << failed.size() << " known failure(s), everything else passed\n";
  return 0;
}
