#include "xalign/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>

#include "xalign/errors.hpp"
#include "xalign/hash.hpp"
#include "xalign/io.hpp"
#include "xalign/parallel.hpp"

namespace xalign {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Reads typed fields from one config section and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidConfig("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidConfig("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw InvalidConfig("config: unknown key '" + name_ + "." + key + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

json pcm_to_json(const PcmConfig& c) {
  return {{"delta", c.delta},
          {"lambda0", c.lambda0},
          {"n_iter", c.n_iter},
          {"reject_threshold", c.reject_threshold ? json(*c.reject_threshold) : json(nullptr)},
          {"smoothing_window", c.smoothing_window},
          {"seed", c.seed}};
}

json scene_to_json(const SceneConfig& c) {
  return {{"person_count", c.person_count},
          {"frames", c.frames},
          {"camera_count", c.camera_count},
          {"pixel_noise_sigma", c.pixel_noise_sigma},
          {"joint3d_noise_sigma", c.joint3d_noise_sigma},
          {"dropout_rate", c.dropout_rate},
          {"fov_degrees", c.fov_degrees},
          {"image_width", c.image_width},
          {"image_height", c.image_height},
          {"moving_cameras", c.moving_cameras},
          {"pose_noise_deg", c.pose_noise_deg},
          {"synchronized_pose_groups", c.synchronized_pose_groups},
          {"sync_deviation_deg", c.sync_deviation_deg},
          {"seed", c.seed}};
}

std::string fingerprint(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

json ids_of(const std::vector<std::size_t>& indices, const auto& tracks) {
  json out = json::array();
  for (auto i : indices) out.push_back(tracks[i].person_id);
  return out;
}

void require_skeleton(const StreamHeader& h, const std::string& path) {
  const auto& expected = CanonicalSkeleton::builtin().content_hash();
  if (h.skeleton_hash != expected)
    throw HashMismatch(path + ": skeleton hash " + h.skeleton_hash + " does not match " + expected);
}

void print_warnings(const std::vector<std::string>& warnings, const std::string& path, std::ostream& log) {
  for (const auto& w : warnings) log << "warning: " << path << ": " << w << "\n";
}

std::vector<PersonTrack2D> resample(const std::vector<PersonTrack2D>& tracks, const TimelineMap& map) {
  const std::size_t frames = map.camera_frame.size();
  std::vector<PersonTrack2D> out;
  out.reserve(tracks.size());
  for (const auto& track : tracks) {
    PersonTrack2D r = PersonTrack2D::invalid(track.person_id, frames);
    for (std::size_t t = 0; t < frames; ++t) {
      const auto cf = map.camera_frame[t];
      if (!cf || *cf >= track.frame_count() || !track.valid[*cf]) continue;
      r.joints[t] = track.joints[*cf];
      r.confidence[t] = track.confidence[*cf];
      r.body_pose[t] = track.body_pose[*cf];
      r.valid[t] = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Paths in match outputs are stored relative to the output directory.
std::string relative_to(const std::string& path, const std::string& dir) {
  return fs::proximate(fs::absolute(path), fs::absolute(dir)).generic_string();
}

fs::path resolve_relative(const std::string& recorded, const std::string& anchor_file) {
  const fs::path p(recorded);
  if (p.is_absolute()) return p;
  const fs::path alt = fs::path(anchor_file).parent_path() / p;
  return fs::exists(alt) || !fs::exists(p) ? alt : p;
}

}  // namespace

json AppConfig::to_json() const {
  json bench_json = {{"person_counts", bench.person_counts},
                     {"noise_levels", bench.noise_levels},
                     {"synchronized", bench.synchronized},
                     {"seeds", bench.seeds},
                     {"modes", json::array()},
                     {"repetitions", bench.repetitions},
                     {"timing_scenes", bench.timing_scenes},
                     {"measure_refinement", bench.measure_refinement}};
  for (auto m : bench.modes) bench_json["modes"].push_back(std::string(to_string(m)));
  return {{"pcm", pcm_to_json(pcm)},
          {"refine", {{"lambda1", refine.lambda1}, {"lambda2", refine.lambda2}, {"lambda3", refine.lambda3}}},
          {"scene", scene_to_json(scene)},
          {"bench", bench_json}};
}

AppConfig AppConfig::from_json(const json& j) {
  AppConfig c;
  Section root(j, "config");
  if (root.has("pcm")) {
    Section s(root.at("pcm"), "pcm");
    s.read("delta", c.pcm.delta);
    s.read("lambda0", c.pcm.lambda0);
    s.read("n_iter", c.pcm.n_iter);
    if (s.has("reject_threshold") && !s.at("reject_threshold").is_null()) {
      double v = 0.0;
      s.read("reject_threshold", v);
      c.pcm.reject_threshold = v;
    } else if (s.has("reject_threshold")) {
      c.pcm.reject_threshold.reset();
    }
    s.read("smoothing_window", c.pcm.smoothing_window);
    s.read("seed", c.pcm.seed);
    s.finish();
  }
  if (root.has("refine")) {
    Section s(root.at("refine"), "refine");
    s.read("lambda1", c.refine.lambda1);
    s.read("lambda2", c.refine.lambda2);
    s.read("lambda3", c.refine.lambda3);
    s.finish();
  }
  if (root.has("scene")) {
    Section s(root.at("scene"), "scene");
    s.read("person_count", c.scene.person_count);
    s.read("frames", c.scene.frames);
    s.read("camera_count", c.scene.camera_count);
    s.read("pixel_noise_sigma", c.scene.pixel_noise_sigma);
    s.read("joint3d_noise_sigma", c.scene.joint3d_noise_sigma);
    s.read("dropout_rate", c.scene.dropout_rate);
    s.read("fov_degrees", c.scene.fov_degrees);
    s.read("image_width", c.scene.image_width);
    s.read("image_height", c.scene.image_height);
    s.read("moving_cameras", c.scene.moving_cameras);
    s.read("pose_noise_deg", c.scene.pose_noise_deg);
    s.read("synchronized_pose_groups", c.scene.synchronized_pose_groups);
    s.read("sync_deviation_deg", c.scene.sync_deviation_deg);
    s.read("seed", c.scene.seed);
    s.finish();
  }
  if (root.has("bench")) {
    Section s(root.at("bench"), "bench");
    s.read("person_counts", c.bench.person_counts);
    s.read("noise_levels", c.bench.noise_levels);
    s.read("synchronized", c.bench.synchronized);
    if (s.has("seeds") && s.has("seed_count")) throw InvalidConfig("config: give bench.seeds or bench.seed_count, not both");
    s.read("seeds", c.bench.seeds);
    if (s.has("seed_count")) {
      std::size_t n = 0;
      s.read("seed_count", n);
      c.bench.seeds.resize(n);
      for (std::size_t i = 0; i < n; ++i) c.bench.seeds[i] = i;
    } else {
      std::size_t unused = 0;
      s.read("seed_count", unused);
    }
    if (s.has("modes")) {
      std::vector<std::string> names;
      s.read("modes", names);
      c.bench.modes.clear();
      try {
        for (const auto& n : names) c.bench.modes.push_back(parse_ablation_mode(n));
      } catch (const UsageError& e) {
        throw InvalidConfig(std::string("config: bench.modes: ") + e.what());
      }
    }
    s.read("repetitions", c.bench.repetitions);
    s.read("timing_scenes", c.bench.timing_scenes);
    s.read("measure_refinement", c.bench.measure_refinement);
    s.finish();
  }
  root.finish();
  c.pcm.validate();
  c.scene.validate();
  for (double w : {c.refine.lambda1, c.refine.lambda2, c.refine.lambda3})
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidConfig("config: refine weights must be finite and >= 0");
  c.bench.scene = c.scene;
  c.bench.pcm = c.pcm;
  return c;
}

AppConfig AppConfig::load(const std::optional<std::string>& path) {
  if (!path) return {};
  json j;
  try {
    j = json::parse(read_file(*path));
  } catch (const json::exception& e) {
    throw InvalidConfig("config: " + *path + ": " + e.what());
  }
  return from_json(j);
}

TimelineMap align_timelines(const std::vector<double>& lidar_times, double lidar_rate,
                            const std::vector<double>& camera_times) {
  if (!std::is_sorted(lidar_times.begin(), lidar_times.end()))
    throw DataError("LiDAR timestamps are not increasing");
  TimelineMap map;
  map.camera_frame.assign(lidar_times.size(), std::nullopt);
  std::vector<double> best(lidar_times.size(), std::numeric_limits<double>::infinity());
  const double half_period = 0.5 / lidar_rate;
  for (std::size_t c = 0; c < camera_times.size(); ++c) {
    const double tau = camera_times[c];
    const auto it = std::lower_bound(lidar_times.begin(), lidar_times.end(), tau);
    std::optional<std::size_t> nearest;
    double gap = std::numeric_limits<double>::infinity();
    if (it != lidar_times.end()) {
      nearest = static_cast<std::size_t>(it - lidar_times.begin());
      gap = *it - tau;
    }
    if (it != lidar_times.begin() && tau - *std::prev(it) <= gap) {
      nearest = static_cast<std::size_t>(std::prev(it) - lidar_times.begin());
      gap = tau - *std::prev(it);
    }
    // Small slack so frames exactly half a period away are not lost to rounding.
    if (!nearest || gap > half_period * (1.0 + 1e-9)) {
      ++map.dropped;
      continue;
    }
    if (gap < best[*nearest]) {
      if (map.camera_frame[*nearest]) ++map.dropped;
      map.camera_frame[*nearest] = c;
      best[*nearest] = gap;
    } else {
      ++map.dropped;
    }
  }
  return map;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

int cmd_match(const std::string& lidar_path, const std::vector<std::string>& camera_paths, const AppConfig& config,
              const std::string& out_dir, const MatchOptions& options, std::ostream& log) {
  if (camera_paths.empty()) throw UsageError("match: at least one camera stream is required");
  config.pcm.validate();
  const std::string lidar_bytes = read_file(lidar_path);
  const StreamFile lidar = parse_stream_text(lidar_bytes);
  if (lidar.header.sensor != SensorKind::kLidar3D) throw DataError(lidar_path + ": not a lidar3d stream");
  require_skeleton(lidar.header, lidar_path);
  print_warnings(lidar.warnings, lidar_path, log);
  fs::create_directories(out_dir);

  const json echo = config.to_json();
  std::mutex log_mutex;
  std::vector<int> codes(camera_paths.size(), 0);
  std::vector<std::string> messages(camera_paths.size());
  const std::size_t outer = std::min(options.threads, camera_paths.size());
  const ExecutionOptions exec{std::max<std::size_t>(1, options.threads / std::max<std::size_t>(1, outer))};

  parallel_for(camera_paths.size(), outer, [&](std::size_t ci) {
    const std::string& path = camera_paths[ci];
    std::ostringstream local;
    try {
      const std::string bytes = read_file(path);
      const StreamFile camera = parse_stream_text(bytes);
      if (camera.header.sensor != SensorKind::kCamera2D) throw DataError(path + ": not a camera2d stream");
      require_skeleton(camera.header, path);
      print_warnings(camera.warnings, path, local);
      const Intrinsics& k = *camera.header.intrinsics;

      const TimelineMap map = align_timelines(lidar.times, lidar.header.frame_rate, camera.times);
      if (map.dropped > 0)
        local << "warning: " << path << ": " << map.dropped << " camera frame(s) without a LiDAR counterpart dropped\n";
      const std::vector<PersonTrack2D> tracks2d = resample(camera.tracks2d, map);

      MatchSet match;
      ExtrinsicsTrack extrinsics(lidar.header.frames);
      json diagnostics = nullptr;
      const bool any_person = std::any_of(tracks2d.begin(), tracks2d.end(), [](const PersonTrack2D& t) {
        return std::find(t.valid.begin(), t.valid.end(), true) != t.valid.end();
      });
      if (!any_person) {
        local << "warning: " << path << ": no camera persons on the LiDAR timeline; empty match\n";
        match.complete(lidar.tracks3d.size(), tracks2d.size());
      } else if (options.mode == AblationMode::kFull) {
        PcmResult r = pcm(lidar.tracks3d, tracks2d, k, config.pcm, exec);
        match = std::move(r.match);
        extrinsics = std::move(r.extrinsics);
        diagnostics = {{"variance_m2", r.diagnostics.variance},
                       {"keypoint_path", r.diagnostics.keypoint_path},
                       {"opt_match_calls", r.diagnostics.opt_match_calls},
                       {"failed_frames", r.diagnostics.failed_frames},
                       {"skipped_frames", r.diagnostics.skipped_frames}};
      } else {
        match = ablation_match(options.mode, lidar.tracks3d, tracks2d, k, config.pcm, std::nullopt, exec);
        const ExtrinsicsTrack raw = per_frame_extrinsics(lidar.tracks3d, tracks2d, match, k);
        score_match(lidar.tracks3d, tracks2d, k, raw, match);
        extrinsics = smooth_extrinsics(raw, config.pcm.smoothing_window);
      }

      json pairs = json::array();
      for (const auto& p : match.pairs)
        pairs.push_back({{"idx3d", p.idx3d},
                         {"idx2d", p.idx2d},
                         {"lidar_id", lidar.tracks3d[p.idx3d].person_id},
                         {"camera_id", tracks2d[p.idx2d].person_id},
                         {"residual_px", p.residual ? json(*p.residual) : json(nullptr)}});
      json frames = json::array();
      for (std::size_t t = 0; t < extrinsics.size(); ++t) {
        if (!extrinsics[t]) continue;
        json e = extrinsics_to_json(*extrinsics[t]);
        e["frame"] = t;
        frames.push_back(e);
      }
      json frame_map = json::array();
      for (const auto& cf : map.camera_frame) frame_map.push_back(cf ? json(*cf) : json(nullptr));

      const json out = {{"format", kMatchFormat},
                        {"version", kMatchFormatVersion},
                        {"skeleton_hash", lidar.header.skeleton_hash},
                        {"lidar", {{"path", relative_to(lidar_path, out_dir)}, {"fingerprint", fingerprint(lidar_bytes)}}},
                        {"camera",
                         {{"path", relative_to(path, out_dir)}, {"fingerprint", fingerprint(bytes)}, {"intrinsics", intrinsics_to_json(k)}}},
                        {"mode", std::string(to_string(options.mode))},
                        {"config", echo},
                        {"pairs", pairs},
                        {"unmatched3d", ids_of(match.unmatched3d, lidar.tracks3d)},
                        {"unmatched2d", ids_of(match.unmatched2d, tracks2d)},
                        {"frame_map", frame_map},
                        {"extrinsics", frames},
                        {"diagnostics", diagnostics}};
      const fs::path target = fs::path(out_dir) / (fs::path(path).stem().string() + ".match.json");
      write_file(target.string(), out.dump(2) + "\n");
      local << "wrote " << target.string() << " (" << match.pairs.size() << " pairs)\n";
    } catch (const Error& e) {
      codes[ci] = exit_code_for(e);
      local << "error: " << path << ": " << e.what() << "\n";
    }
    const std::lock_guard lock(log_mutex);
    messages[ci] = local.str();
  });
  for (const auto& m : messages) log << m;
  if (std::all_of(codes.begin(), codes.end(), [](int c) { return c != 0; })) return codes.front();
  return 0;
}

void cmd_refine(const std::string& lidar_path, const std::vector<std::string>& match_paths, const AppConfig& config,
                const std::string& out_path, std::ostream& log) {
  const std::string lidar_bytes = read_file(lidar_path);
  StreamFile lidar = parse_stream_text(lidar_bytes);
  if (lidar.header.sensor != SensorKind::kLidar3D) throw DataError(lidar_path + ": not a lidar3d stream");
  print_warnings(lidar.warnings, lidar_path, log);
  const std::string lidar_fp = fingerprint(lidar_bytes);

  struct CameraView {
    StreamFile stream;
    Intrinsics k;
    std::vector<std::optional<std::size_t>> partner;  // per LiDAR person
    std::vector<std::optional<std::size_t>> frame_map;
    std::vector<std::optional<Extrinsics>> extrinsics;
  };
  std::vector<CameraView> views;
  for (const auto& mp : match_paths) {
    json m;
    try {
      m = json::parse(read_file(mp));
    } catch (const json::exception& e) {
      throw DataError(mp + ": " + e.what());
    }
    try {
      if (m.value("format", "") != kMatchFormat || m.value("version", 0) != kMatchFormatVersion)
        throw DataError(mp + ": not a match output");
      if (m.at("skeleton_hash").get<std::string>() != lidar.header.skeleton_hash)
        throw HashMismatch(mp + ": skeleton hash differs from " + lidar_path);
      if (m.at("lidar").at("fingerprint").get<std::string>() != lidar_fp)
        throw HashMismatch(mp + ": produced from a different LiDAR stream than " + lidar_path);
      const fs::path camera_path = resolve_relative(m.at("camera").at("path").get<std::string>(), mp);
      const std::string camera_bytes = read_file(camera_path.string());
      if (m.at("camera").at("fingerprint").get<std::string>() != fingerprint(camera_bytes))
        throw HashMismatch(mp + ": camera stream " + camera_path.string() + " changed since matching");
      CameraView view;
      view.stream = parse_stream_text(camera_bytes);
      if (view.stream.header.skeleton_hash != lidar.header.skeleton_hash)
        throw HashMismatch(camera_path.string() + ": skeleton hash differs from " + lidar_path);
      view.k = *view.stream.header.intrinsics;
      view.partner.assign(lidar.tracks3d.size(), std::nullopt);
      for (const auto& p : m.at("pairs")) {
        const auto i = p.at("idx3d").get<std::size_t>();
        const auto j = p.at("idx2d").get<std::size_t>();
        if (i >= lidar.tracks3d.size() || j >= view.stream.tracks2d.size()) throw DataError(mp + ": pair out of range");
        view.partner[i] = j;
      }
      view.frame_map.assign(lidar.header.frames, std::nullopt);
      const auto& fm = m.at("frame_map");
      if (fm.size() != lidar.header.frames) throw DataError(mp + ": frame_map length differs from the LiDAR stream");
      for (std::size_t t = 0; t < fm.size(); ++t)
        if (!fm[t].is_null()) view.frame_map[t] = fm[t].get<std::size_t>();
      view.extrinsics.assign(lidar.header.frames, std::nullopt);
      for (const auto& e : m.at("extrinsics")) {
        const auto t = e.at("frame").get<std::size_t>();
        if (t >= lidar.header.frames) throw DataError(mp + ": extrinsics frame out of range");
        view.extrinsics[t] = extrinsics_from_json(e);
      }
      views.push_back(std::move(view));
    } catch (const json::exception& e) {
      throw DataError(mp + ": " + e.what());
    }
  }

  RefineWeights weights = config.refine;
  std::size_t refined = 0;
  for (std::size_t p = 0; p < lidar.tracks3d.size(); ++p) {
    auto& track = lidar.tracks3d[p];
    for (std::size_t t = 0; t < track.frame_count(); ++t) {
      if (!track.valid[t]) continue;
      RefineProblem problem;
      problem.initial3d = track.joints[t];
      problem.weights = weights;
      for (const auto& v : views) {
        if (!v.partner[p] || !v.frame_map[t] || !v.extrinsics[t]) continue;
        const auto& cam = v.stream.tracks2d[*v.partner[p]];
        const std::size_t cf = *v.frame_map[t];
        if (cf >= cam.frame_count() || !cam.valid[cf]) continue;
        problem.observations.push_back({v.k, *v.extrinsics[t], cam.joints[cf], cam.confidence[cf]});
      }
      if (problem.observations.empty()) continue;
      track.joints[t] = refine(problem).refined3d;
      ++refined;
    }
  }
  lidar.header.config = config.to_json();
  lidar.warnings.clear();
  write_stream(lidar, out_path);
  log << "wrote " << out_path << " (" << refined << " person-frames refined from " << views.size() << " camera(s))\n";
}

void cmd_simulate(const AppConfig& config, const std::string& out_dir, std::ostream& log) {
  const Scene scene = generate(config.scene);
  fs::create_directories(out_dir);
  const json echo = config.to_json();
  const std::string& skeleton_hash = CanonicalSkeleton::builtin().content_hash();
  const std::size_t frames = scene.truth.frame_count();
  std::vector<double> times(frames);
  for (std::size_t t = 0; t < frames; ++t) times[t] = static_cast<double>(t) / kSimulatorFrameRate;

  StreamFile lidar;
  lidar.header = {SensorKind::kLidar3D, kSimulatorFrameRate, skeleton_hash, std::nullopt, frames, {}, echo};
  for (const auto& t : scene.tracks3d) lidar.header.person_ids.push_back(t.person_id);
  lidar.times = times;
  lidar.tracks3d = scene.tracks3d;
  const std::string lidar_path = (fs::path(out_dir) / "lidar.jsonl").string();
  write_stream(lidar, lidar_path);
  log << "wrote " << lidar_path << "\n";

  json cameras = json::array();
  for (std::size_t c = 0; c < scene.truth.camera_count(); ++c) {
    StreamFile cam;
    cam.header = {SensorKind::kCamera2D, kSimulatorFrameRate, skeleton_hash, scene.intrinsics, frames, {}, echo};
    for (const auto& t : scene.tracks2d[c]) cam.header.person_ids.push_back(t.person_id);
    cam.times = times;
    cam.tracks2d = scene.tracks2d[c];
    const std::string name = "camera_" + std::to_string(c) + ".jsonl";
    const std::string path = (fs::path(out_dir) / name).string();
    write_stream(cam, path);
    log << "wrote " << path << "\n";

    json correspondence = json::object();
    json visible = json::object();
    for (std::size_t p = 0; p < scene.truth.person_count(); ++p) {
      const std::string& lid = scene.tracks3d[p].person_id;
      correspondence[lid] = scene.tracks2d[c][scene.truth.index2d[c][p]].person_id;
      visible[lid] = scene.truth.visible[c][p];
    }
    json extrinsics = json::array();
    for (const auto& m : scene.truth.extrinsics[c]) extrinsics.push_back(extrinsics_to_json(m));
    cameras.push_back({{"stream", name},
                       {"intrinsics", intrinsics_to_json(scene.intrinsics)},
                       {"correspondence", correspondence},
                       {"visible", visible},
                       {"extrinsics", extrinsics}});
  }
  json joints = json::object();
  for (std::size_t p = 0; p < scene.truth.person_count(); ++p) {
    json per_frame = json::array();
    for (const auto& frame : scene.truth.joints[p]) {
      json js = json::array();
      for (const auto& x : frame) js.push_back({x.x(), x.y(), x.z()});
      per_frame.push_back(js);
    }
    joints[scene.tracks3d[p].person_id] = per_frame;
  }
  const json truth = {{"format", "xalign-truth"},
                      {"version", 1},
                      {"skeleton_hash", skeleton_hash},
                      {"config", echo},
                      {"frames", frames},
                      {"frame_rate", kSimulatorFrameRate},
                      {"cameras", cameras},
                      {"joints", joints}};
  const std::string truth_path = (fs::path(out_dir) / "truth.json").string();
  write_file(truth_path, truth.dump(1) + "\n");
  log << "wrote " << truth_path << "\n";
}

void cmd_bench(const AppConfig& config, const std::string& out_path, std::size_t threads, std::ostream& log) {
  BenchSpec spec = config.bench;
  spec.scene = config.scene;
  spec.pcm = config.pcm;
  spec.threads = threads;
  MetricsReport report = run_bench(spec);
  report.config = config.to_json().dump();
  export_report(report, out_path);
  for (const auto& f : report.failures) log << "failure: " << f << "\n";
  log << "wrote " << out_path << " (" << report.rows.size() << " rows)\n";
}

}  // namespace xalign
