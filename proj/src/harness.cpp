#include "xalign/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xalign/errors.hpp"
#include "xalign/parallel.hpp"
#include "xalign/refiner.hpp"
#include "xalign/seeding.hpp"

namespace xalign {
namespace {

struct Cell {
  std::size_t person_count;
  double noise;
  bool synchronized;
};

SceneConfig scene_config(const BenchSpec& spec, const Cell& cell, std::uint64_t seed, std::size_t rep) {
  SceneConfig c = spec.scene;
  c.person_count = cell.person_count;
  c.pixel_noise_sigma = cell.noise;
  c.synchronized_pose_groups.clear();
  if (cell.synchronized)
    for (std::size_t p = 0; p + 1 < cell.person_count; p += 2) c.synchronized_pose_groups.push_back({p, p + 1});
  c.seed = spec.repetitions == 1 ? seed : sub_seed(seed, 0x5245, rep);
  return c;
}

double mean_joint_error(const Joints3& a, const Joints3& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) s += (a[j] - b[j]).norm();
  return s / static_cast<double>(kJointCount);
}

struct RefineTally {
  std::size_t trials = 0;
  double input = 0.0;
  double refined = 0.0;
  std::size_t improved = 0;
};

// Every person at the middle frame, refined against all cameras that see them.
RefineTally refine_scene(const Scene& scene) {
  RefineTally tally;
  const std::size_t t = scene.truth.frame_count() / 2;
  for (std::size_t p = 0; p < scene.truth.person_count(); ++p) {
    RefineProblem problem;
    problem.initial3d = scene.tracks3d[p].joints[t];
    for (std::size_t c = 0; c < scene.truth.camera_count(); ++c) {
      if (!scene.truth.visible[c][p][t]) continue;
      const auto& track = scene.tracks2d[c][scene.truth.index2d[c][p]];
      problem.observations.push_back({scene.intrinsics, scene.truth.extrinsics[c][t], track.joints[t], track.confidence[t]});
    }
    if (problem.observations.empty()) continue;
    const RefineResult r = refine(problem);
    const double before = mean_joint_error(problem.initial3d, scene.truth.joints[p][t]);
    const double after = mean_joint_error(r.refined3d, scene.truth.joints[p][t]);
    ++tally.trials;
    tally.input += before;
    tally.refined += after;
    tally.improved += after <= before ? 1 : 0;
  }
  return tally;
}

struct RunResult {
  bool ok = false;
  double accuracy = 0.0;
  std::string error;
};

// -- CSV ------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DataError("report: bad number '" + std::string(s) + "'");
  return v;
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DataError("report: bad count '" + std::string(s) + "'");
  return v;
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  if (quoted) throw DataError("report: unterminated quoted field");
  return out;
}

constexpr std::string_view kRowHeader =
    "mode,person_count,pixel_noise,synchronized,scenes,failures,accuracy_mean,accuracy_std,timed_frames,seconds,fps";

}  // namespace

void BenchSpec::validate() const {
  if (person_counts.empty() || noise_levels.empty() || synchronized.empty() || seeds.empty())
    throw InvalidSpec("bench: every grid axis needs at least one value");
  if (modes.empty()) throw InvalidSpec("bench: no ablation modes selected");
  if (repetitions < 1) throw InvalidSpec("bench: repetitions must be >= 1");
  if (threads < 1) throw InvalidSpec("bench: threads must be >= 1");
  for (auto n : person_counts)
    if (n < 1) throw InvalidSpec("bench: person counts must be >= 1");
  for (double s : noise_levels)
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidSpec("bench: noise levels must be finite and >= 0");
  try {
    SceneConfig probe = scene;
    probe.synchronized_pose_groups.clear();
    probe.validate();
    pcm.validate();
  } catch (const InvalidConfig& e) {
    throw InvalidSpec(std::string("bench: ") + e.what());
  }
}

double scene_accuracy(AblationMode mode, const Scene& scene, std::size_t camera, const PcmConfig& config,
                      const ExecutionOptions& exec) {
  const auto& tracks2d = scene.tracks2d[camera];
  if (!is_single_frame(mode))
    return accuracy(ablation_match(mode, scene.tracks3d, tracks2d, scene.intrinsics, config, std::nullopt, exec),
                    scene.truth, camera);
  double sum = 0.0;
  std::size_t frames = 0;
  for (std::size_t t = 0; t < scene.truth.frame_count(); ++t) {
    if (scene.truth.visible_pairs(camera, t).empty()) continue;
    ++frames;
    // A frame with no viable proposal recovers nothing.
    try {
      sum += accuracy(ablation_match(mode, scene.tracks3d, tracks2d, scene.intrinsics, config, t, exec), scene.truth,
                      camera, t);
    } catch (const NoViableProposal&) {
    }
  }
  return frames == 0 ? 1.0 : sum / static_cast<double>(frames);
}

MetricsReport run_bench(const BenchSpec& spec) {
  spec.validate();
  std::vector<Cell> cells;
  for (auto n : spec.person_counts)
    for (double noise : spec.noise_levels)
      for (bool sync : spec.synchronized) cells.push_back({n, noise, sync});
  const std::size_t per_cell = spec.seeds.size() * spec.repetitions;
  const std::size_t modes = spec.modes.size();

  // Accuracy pass: one job per scene, every mode and every camera on it.
  const std::size_t jobs = cells.size() * per_cell;
  std::vector<std::vector<RunResult>> runs(jobs, std::vector<RunResult>(modes));
  std::vector<RefineTally> tallies(jobs);
  parallel_for(jobs, spec.threads, [&](std::size_t job) {
    const Cell& cell = cells[job / per_cell];
    const std::size_t s = job % per_cell;
    const SceneConfig config = scene_config(spec, cell, spec.seeds[s / spec.repetitions], s % spec.repetitions);
    const Scene scene = generate(config);
    for (std::size_t m = 0; m < modes; ++m) {
      RunResult& run = runs[job][m];
      try {
        double acc = 0.0;
        for (std::size_t c = 0; c < scene.truth.camera_count(); ++c)
          acc += scene_accuracy(spec.modes[m], scene, c, spec.pcm);
        run.accuracy = acc / static_cast<double>(scene.truth.camera_count());
        run.ok = true;
      } catch (const Error& e) {
        run.error = std::string(to_string(spec.modes[m])) + " n=" + std::to_string(cell.person_count) +
                    " noise=" + format_double(cell.noise) + " sync=" + (cell.synchronized ? "1" : "0") +
                    " seed=" + std::to_string(config.seed) + ": " + e.what();
      }
    }
    if (spec.measure_refinement) tallies[job] = refine_scene(scene);
  });

  MetricsReport report;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (std::size_t m = 0; m < modes; ++m) {
      MetricsRow row;
      row.mode = std::string(to_string(spec.modes[m]));
      row.person_count = cells[ci].person_count;
      row.pixel_noise = cells[ci].noise;
      row.synchronized = cells[ci].synchronized;
      row.scenes = per_cell;
      std::vector<double> values;
      for (std::size_t s = 0; s < per_cell; ++s) {
        const RunResult& run = runs[ci * per_cell + s][m];
        if (run.ok) {
          values.push_back(run.accuracy);
        } else {
          ++row.failures;
          report.failures.push_back(run.error);
        }
      }
      if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        row.accuracy_mean = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - row.accuracy_mean) * (v - row.accuracy_mean);
        row.accuracy_std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
      }
      report.rows.push_back(row);
    }
  }

  RefineTally total;
  for (const auto& t : tallies) {
    total.trials += t.trials;
    total.input += t.input;
    total.refined += t.refined;
    total.improved += t.improved;
  }
  if (total.trials > 0) {
    const auto n = static_cast<double>(total.trials);
    report.refinement = {total.trials, total.input / n, total.refined / n, static_cast<double>(total.improved) / n};
  }

  // Timing pass: single pipeline, no concurrent work.
  const std::size_t timed = std::min(spec.timing_scenes, per_cell);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (std::size_t s = 0; s < timed; ++s) {
      const SceneConfig config = scene_config(spec, cells[ci], spec.seeds[s / spec.repetitions], s % spec.repetitions);
      const Scene scene = generate(config);
      for (std::size_t m = 0; m < modes; ++m) {
        if (!runs[ci * per_cell + s][m].ok) continue;
        MetricsRow& row = report.rows[ci * modes + m];
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t c = 0; c < scene.truth.camera_count(); ++c) {
          if (is_single_frame(spec.modes[m])) {
            for (std::size_t t = 0; t < scene.truth.frame_count(); ++t) {
              try {
                ablation_match(spec.modes[m], scene.tracks3d, scene.tracks2d[c], scene.intrinsics, spec.pcm, t);
              } catch (const NoViableProposal&) {
              }
            }
          } else {
            ablation_match(spec.modes[m], scene.tracks3d, scene.tracks2d[c], scene.intrinsics, spec.pcm);
          }
          row.timed_frames += scene.truth.frame_count();
        }
        row.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
    }
  }
  for (auto& row : report.rows) {
    if (row.seconds > 0.0) row.fps = static_cast<double>(row.timed_frames) / row.seconds;
    report.mode_seconds[row.mode] += row.seconds;
  }
  return report;
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream out;
  out << "schema,xalign-bench-report," << kReportSchemaVersion << "\n";
  out << kRowHeader << "\n";
  for (const auto& r : report.rows) {
    out << quote(r.mode) << ',' << r.person_count << ',' << format_double(r.pixel_noise) << ','
        << (r.synchronized ? 1 : 0) << ',' << r.scenes << ',' << r.failures << ',' << format_double(r.accuracy_mean)
        << ',' << format_double(r.accuracy_std) << ',' << r.timed_frames << ',' << format_double(r.seconds) << ','
        << format_double(r.fps) << "\n";
  }
  out << "\nsummary,key,value\n";
  out << "summary,refinement_trials," << report.refinement.trials << "\n";
  out << "summary,refinement_input_error_mean," << format_double(report.refinement.input_error_mean) << "\n";
  out << "summary,refinement_refined_error_mean," << format_double(report.refinement.refined_error_mean) << "\n";
  out << "summary,refinement_improved_fraction," << format_double(report.refinement.improved_fraction) << "\n";
  for (const auto& [mode, secs] : report.mode_seconds)
    out << "summary," << quote("mode_seconds." + mode) << ',' << format_double(secs) << "\n";
  for (const auto& f : report.failures) out << "summary,failure," << quote(f) << "\n";
  if (!report.config.empty()) out << "summary,config," << quote(report.config) << "\n";
  return out.str();
}

void export_report(const MetricsReport& report, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoFailure("cannot open report file " + path);
  file << format_report(report);
  file.flush();
  if (!file) throw IoFailure("failed writing report file " + path);
}

MetricsReport parse_report(std::string_view text) {
  MetricsReport report;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("report: empty input");
  const auto schema = split_csv(line);
  if (schema.size() != 3 || schema[0] != "schema" || schema[1] != "xalign-bench-report")
    throw DataError("report: missing schema line");
  if (parse_size(schema[2]) != static_cast<std::size_t>(kReportSchemaVersion))
    throw DataError("report: unsupported schema version " + schema[2]);
  if (!std::getline(in, line) || line != kRowHeader) throw DataError("report: missing column header");
  bool in_summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      in_summary = true;
      continue;
    }
    const auto f = split_csv(line);
    if (!in_summary) {
      if (f.size() != 11) throw DataError("report: data row with " + std::to_string(f.size()) + " fields");
      MetricsRow r;
      r.mode = f[0];
      r.person_count = parse_size(f[1]);
      r.pixel_noise = parse_double(f[2]);
      r.synchronized = parse_size(f[3]) != 0;
      r.scenes = parse_size(f[4]);
      r.failures = parse_size(f[5]);
      r.accuracy_mean = parse_double(f[6]);
      r.accuracy_std = parse_double(f[7]);
      r.timed_frames = parse_size(f[8]);
      r.seconds = parse_double(f[9]);
      r.fps = parse_double(f[10]);
      report.rows.push_back(r);
      continue;
    }
    if (f.size() != 3 || f[0] != "summary") throw DataError("report: malformed summary line");
    const std::string& key = f[1];
    if (key == "key") continue;
    if (key == "refinement_trials") {
      report.refinement.trials = parse_size(f[2]);
    } else if (key == "refinement_input_error_mean") {
      report.refinement.input_error_mean = parse_double(f[2]);
    } else if (key == "refinement_refined_error_mean") {
      report.refinement.refined_error_mean = parse_double(f[2]);
    } else if (key == "refinement_improved_fraction") {
      report.refinement.improved_fraction = parse_double(f[2]);
    } else if (key.starts_with("mode_seconds.")) {
      report.mode_seconds[key.substr(13)] = parse_double(f[2]);
    } else if (key == "failure") {
      report.failures.push_back(f[2]);
    } else if (key == "config") {
      report.config = f[2];
    } else {
      throw DataError("report: unknown summary key " + key);
    }
  }
  return report;
}

}  // namespace xalign
