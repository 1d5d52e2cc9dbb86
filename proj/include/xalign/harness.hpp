#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xalign/matching.hpp"
#include "xalign/simulator.hpp"

namespace xalign {

struct BenchSpec {
  // Grid axes; the sweep runs their Cartesian product.
  std::vector<std::size_t> person_counts{4};
  std::vector<double> noise_levels{2.0};  // pixel noise sigma
  std::vector<bool> synchronized{false};  // pairs (0,1), (2,3), ... share body poses
  std::vector<std::uint64_t> seeds{0};
  std::vector<AblationMode> modes{AblationMode::kFull};
  std::size_t repetitions = 1;
  // Every other scene parameter; person_count, pixel_noise_sigma, groups and seed are overridden per cell.
  SceneConfig scene;
  PcmConfig pcm;
  std::size_t threads = 1;
  // Scenes per cell used for the timing pass.
  std::size_t timing_scenes = 1;
  bool measure_refinement = true;

  // Throws InvalidSpec.
  void validate() const;
};

struct MetricsRow {
  std::string mode;
  std::size_t person_count = 0;
  double pixel_noise = 0.0;
  bool synchronized = false;
  std::size_t scenes = 0;
  std::size_t failures = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::size_t timed_frames = 0;
  double seconds = 0.0;
  double fps = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct RefinementStats {
  std::size_t trials = 0;
  double input_error_mean = 0.0;    // m, mean per-joint
  double refined_error_mean = 0.0;  // m
  double improved_fraction = 0.0;

  friend bool operator==(const RefinementStats&, const RefinementStats&) = default;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;  // ordered by (config, mode)
  RefinementStats refinement;
  std::map<std::string, double> mode_seconds;
  // "mode person_count noise sync seed: message" for each failed run.
  std::vector<std::string> failures;
  // Serialized configuration that produced the report; empty when not set.
  std::string config;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline constexpr int kReportSchemaVersion = 1;

// Failed matching runs are recorded, never thrown. Throws InvalidSpec.
MetricsReport run_bench(const BenchSpec& spec);

// Accuracy of one mode on one scene and camera: sequence modes score the whole
// sequence, single-frame modes are run on every frame and averaged per frame.
double scene_accuracy(AblationMode mode, const Scene& scene, std::size_t camera, const PcmConfig& config,
                      const ExecutionOptions& exec = {});

// Throws IoFailure.
void export_report(const MetricsReport& report, const std::string& path);
std::string format_report(const MetricsReport& report);
// Throws DataError on malformed input.
MetricsReport parse_report(std::string_view text);

}  // namespace xalign
