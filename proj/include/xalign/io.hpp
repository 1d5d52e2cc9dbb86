#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xalign/geometry.hpp"
#include "xalign/matching.hpp"

namespace xalign {

inline constexpr int kStreamFormatVersion = 1;

enum class SensorKind { kLidar3D, kCamera2D };

std::string_view to_string(SensorKind kind);

struct StreamHeader {
  SensorKind sensor = SensorKind::kLidar3D;
  double frame_rate = 10.0;
  std::string skeleton_hash;
  std::optional<Intrinsics> intrinsics;  // cameras only
  std::size_t frames = 0;
  std::vector<std::string> person_ids;
  // Configuration that produced the file; echoed verbatim.
  nlohmann::json config = nlohmann::json::object();
};

// Line 1 is the header object, then one object per frame in increasing frame order.
// Persons absent from a frame record are invalid in that frame.
struct StreamFile {
  StreamHeader header;
  std::vector<double> times;                 // seconds, per frame
  std::vector<PersonTrack3D> tracks3d;       // lidar3d
  std::vector<PersonTrack2D> tracks2d;       // camera2d
  std::vector<std::string> warnings;         // unknown fields seen while parsing
};

// Throws StreamError (MalformedHeader, FrameOrderViolation, JointArityMismatch, MalformedRecord).
StreamFile parse_stream_text(std::string_view text);
// Throws IoFailure and StreamError.
StreamFile parse_stream(const std::string& path);

std::string format_stream(const StreamFile& stream);
// Throws IoFailure.
void write_stream(const StreamFile& stream, const std::string& path);

// Whole-file helpers. Throw IoFailure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Rotation matrices travel as 9 row-major numbers, extrinsics as wxyz quaternion + translation.
nlohmann::json rotation_to_json(const Mat3& r);
Mat3 rotation_from_json(const nlohmann::json& j);
nlohmann::json extrinsics_to_json(const Extrinsics& m);
Extrinsics extrinsics_from_json(const nlohmann::json& j);
nlohmann::json intrinsics_to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const nlohmann::json& j);

}  // namespace xalign
