#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xalign/harness.hpp"
#include "xalign/matching.hpp"
#include "xalign/refiner.hpp"
#include "xalign/simulator.hpp"

namespace xalign {

// Everything a command can be configured with. The file is one JSON object with
// optional "pcm", "refine", "scene" and "bench" sections; omitted fields keep defaults.
struct AppConfig {
  PcmConfig pcm;
  RefineWeights refine;
  SceneConfig scene;
  BenchSpec bench;

  // Resolved values of every field, embedded in command outputs.
  nlohmann::json to_json() const;
  // Throws InvalidConfig (unknown keys, wrong types, out-of-range values).
  static AppConfig from_json(const nlohmann::json& j);
  static AppConfig load(const std::optional<std::string>& path);
};

inline constexpr std::string_view kMatchFormat = "xalign-match";
inline constexpr int kMatchFormatVersion = 1;

// Camera frame used for each LiDAR frame: nearest timestamp within half a LiDAR
// period; a LiDAR frame keeps the closest of competing camera frames.
struct TimelineMap {
  std::vector<std::optional<std::size_t>> camera_frame;  // per LiDAR frame
  std::size_t dropped = 0;                                // camera frames without a counterpart
};
TimelineMap align_timelines(const std::vector<double>& lidar_times, double lidar_rate,
                            const std::vector<double>& camera_times);

struct MatchOptions {
  AblationMode mode = AblationMode::kFull;
  std::size_t threads = 1;
};

// Writes <out_dir>/<camera file stem>.match.json per camera. Returns the process exit
// code: 0 unless every camera failed, in which case the first failure's code.
int cmd_match(const std::string& lidar_path, const std::vector<std::string>& camera_paths, const AppConfig& config,
              const std::string& out_dir, const MatchOptions& options, std::ostream& log);

// Throws HashMismatch when a match output was produced from different streams.
void cmd_refine(const std::string& lidar_path, const std::vector<std::string>& match_paths, const AppConfig& config,
                const std::string& out_path, std::ostream& log);

// Writes lidar.jsonl, camera_<c>.jsonl and truth.json into out_dir.
void cmd_simulate(const AppConfig& config, const std::string& out_dir, std::ostream& log);

void cmd_bench(const AppConfig& config, const std::string& out_path, std::size_t threads, std::ostream& log);

// 1 usage, 2 data, 3 numerical.
int exit_code_for(const std::exception& e);

}  // namespace xalign
