#include "xalign/io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xalign/errors.hpp"

namespace xalign {
namespace {

using nlohmann::json;

constexpr std::string_view kStreamFormat = "xalign-stream";

[[noreturn]] void fail(StreamErrorKind kind, std::size_t line, const std::string& what) {
  throw StreamError(kind, line, what);
}

double number_at(const json& j, std::size_t line, const char* what) {
  if (!j.is_number()) fail(StreamErrorKind::kMalformedRecord, line, std::string(what) + " must be a number");
  return j.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> vector_at(const json& j, std::size_t line, const char* what) {
  if (!j.is_array() || j.size() != N)
    fail(StreamErrorKind::kMalformedRecord, line, std::string(what) + " must have " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = number_at(j[static_cast<std::size_t>(i)], line, what);
  return v;
}

const json& joint_array(const json& person, const char* key, std::size_t line) {
  if (!person.contains(key)) fail(StreamErrorKind::kMalformedRecord, line, std::string("person without '") + key + "'");
  const json& a = person.at(key);
  if (!a.is_array()) fail(StreamErrorKind::kMalformedRecord, line, std::string("'") + key + "' must be an array");
  if (a.size() != kJointCount)
    fail(StreamErrorKind::kJointArityMismatch, line,
         std::string("'") + key + "' has " + std::to_string(a.size()) + " entries, expected 24");
  return a;
}

BodyPose pose_from(const json& person, std::size_t line) {
  const json& a = joint_array(person, "body_pose", line);
  BodyPose pose;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (!a[j].is_array() || a[j].size() != 9)
      fail(StreamErrorKind::kMalformedRecord, line, "body_pose rotations must have 9 numbers");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        pose.rotations[j](r, c) = number_at(a[j][static_cast<std::size_t>(3 * r + c)], line, "body_pose");
  }
  return pose;
}

void note_unknown(const json& object, std::initializer_list<std::string_view> known, std::string_view where,
                  std::size_t line, std::set<std::string>& seen, std::vector<std::string>& warnings) {
  for (const auto& [key, value] : object.items()) {
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    const std::string tag = std::string(where) + "." + key;
    if (seen.insert(tag).second)
      warnings.push_back("line " + std::to_string(line) + ": unknown " + std::string(where) + " field '" + key +
                         "' ignored");
  }
}

StreamHeader parse_header(const std::string& text, std::set<std::string>& seen, std::vector<std::string>& warnings) {
  json h;
  try {
    h = json::parse(text);
  } catch (const json::exception& e) {
    fail(StreamErrorKind::kMalformedHeader, 1, e.what());
  }
  auto bad = [](const std::string& what) { fail(StreamErrorKind::kMalformedHeader, 1, what); };
  if (!h.is_object()) bad("header must be an object");
  if (h.value("format", "") != kStreamFormat) bad("missing or unknown 'format'");
  if (!h.contains("version") || !h["version"].is_number_integer() || h["version"].get<int>() != kStreamFormatVersion)
    bad("unsupported 'version'");
  StreamHeader out;
  const std::string sensor = h.value("sensor", "");
  if (sensor == "lidar3d") {
    out.sensor = SensorKind::kLidar3D;
  } else if (sensor == "camera2d") {
    out.sensor = SensorKind::kCamera2D;
  } else {
    bad("'sensor' must be lidar3d or camera2d");
  }
  if (!h.contains("frame_rate") || !h["frame_rate"].is_number() || !(h["frame_rate"].get<double>() > 0.0))
    bad("'frame_rate' must be a positive number");
  out.frame_rate = h["frame_rate"].get<double>();
  if (!h.contains("skeleton_hash") || !h["skeleton_hash"].is_string()) bad("missing 'skeleton_hash'");
  out.skeleton_hash = h["skeleton_hash"].get<std::string>();
  if (!h.contains("frames") || !h["frames"].is_number_unsigned()) bad("'frames' must be a non-negative integer");
  out.frames = h["frames"].get<std::size_t>();
  if (!h.contains("persons") || !h["persons"].is_array()) bad("'persons' must be an array of ids");
  std::set<std::string> ids;
  for (const auto& id : h["persons"]) {
    if (!id.is_string()) bad("person ids must be strings");
    if (!ids.insert(id.get<std::string>()).second) bad("duplicate person id " + id.get<std::string>());
    out.person_ids.push_back(id.get<std::string>());
  }
  if (out.sensor == SensorKind::kCamera2D) {
    if (!h.contains("intrinsics")) bad("camera streams need 'intrinsics'");
    try {
      out.intrinsics = intrinsics_from_json(h["intrinsics"]);
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  if (h.contains("config")) out.config = h["config"];
  note_unknown(h, {"format", "version", "sensor", "frame_rate", "skeleton_hash", "frames", "persons", "intrinsics", "config"},
               "header", 1, seen, warnings);
  return out;
}

}  // namespace

std::string_view to_string(SensorKind kind) { return kind == SensorKind::kLidar3D ? "lidar3d" : "camera2d"; }

json rotation_to_json(const Mat3& r) {
  json a = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.push_back(r(i, j));
  return a;
}

Mat3 rotation_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw DataError("rotation must have 9 numbers");
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) r(i, c) = j[static_cast<std::size_t>(3 * i + c)].get<double>();
  return r;
}

json extrinsics_to_json(const Extrinsics& m) {
  const Eigen::Vector4d q = rotation_to_quaternion(m.rotation);
  return {{"rotation_wxyz", {q[0], q[1], q[2], q[3]}},
          {"translation", {m.translation.x(), m.translation.y(), m.translation.z()}}};
}

Extrinsics extrinsics_from_json(const json& j) {
  try {
    const auto& q = j.at("rotation_wxyz");
    const auto& t = j.at("translation");
    if (q.size() != 4 || t.size() != 3) throw DataError("extrinsics: wrong arity");
    Eigen::Vector4d wxyz(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
    if (std::abs(wxyz.norm() - 1.0) > 1e-9) throw DataError("extrinsics: quaternion is not unit-norm");
    Extrinsics m;
    m.rotation = quaternion_to_rotation(wxyz);
    m.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("extrinsics: ") + e.what());
  }
}

json intrinsics_to_json(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsics_from_json(const json& j) {
  try {
    Intrinsics k{j.at("fx").get<double>(),    j.at("fy").get<double>(),    j.at("cx").get<double>(),
                 j.at("cy").get<double>(),    j.at("width").get<double>(), j.at("height").get<double>()};
    k.validate();
    return k;
  } catch (const json::exception& e) {
    throw DataError(std::string("intrinsics: ") + e.what());
  }
}

StreamFile parse_stream_text(std::string_view text) {
  StreamFile out;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::optional<std::size_t> previous;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!have_header) {
      if (line_no != 1) fail(StreamErrorKind::kMalformedHeader, line_no, "header must be the first line");
      out.header = parse_header(line, seen, out.warnings);
      have_header = true;
      const std::size_t frames = out.header.frames;
      out.times.resize(frames);
      for (std::size_t t = 0; t < frames; ++t) out.times[t] = static_cast<double>(t) / out.header.frame_rate;
      for (std::size_t p = 0; p < out.header.person_ids.size(); ++p) {
        const auto& id = out.header.person_ids[p];
        index[id] = p;
        if (out.header.sensor == SensorKind::kLidar3D) {
          out.tracks3d.push_back(PersonTrack3D::invalid(id, frames));
        } else {
          out.tracks2d.push_back(PersonTrack2D::invalid(id, frames));
        }
      }
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(StreamErrorKind::kMalformedRecord, line_no, e.what());
    }
    if (!rec.is_object() || !rec.contains("frame") || !rec["frame"].is_number_unsigned())
      fail(StreamErrorKind::kMalformedRecord, line_no, "record needs a non-negative integer 'frame'");
    const auto frame = rec["frame"].get<std::size_t>();
    if (previous && frame <= *previous)
      fail(StreamErrorKind::kFrameOrderViolation, line_no,
           "frame " + std::to_string(frame) + " after frame " + std::to_string(*previous));
    previous = frame;
    if (frame >= out.header.frames)
      fail(StreamErrorKind::kMalformedRecord, line_no, "frame " + std::to_string(frame) + " beyond header 'frames'");
    if (rec.contains("time")) out.times[frame] = number_at(rec["time"], line_no, "time");
    note_unknown(rec, {"frame", "time", "persons"}, "record", line_no, seen, out.warnings);
    if (!rec.contains("persons")) continue;
    if (!rec["persons"].is_array()) fail(StreamErrorKind::kMalformedRecord, line_no, "'persons' must be an array");
    std::set<std::size_t> present;
    for (const auto& person : rec["persons"]) {
      if (!person.is_object() || !person.contains("id") || !person["id"].is_string())
        fail(StreamErrorKind::kMalformedRecord, line_no, "person without an 'id'");
      const auto it = index.find(person["id"].get<std::string>());
      if (it == index.end())
        fail(StreamErrorKind::kMalformedRecord, line_no, "person '" + person["id"].get<std::string>() + "' not in header");
      if (!present.insert(it->second).second)
        fail(StreamErrorKind::kMalformedRecord, line_no, "person '" + it->first + "' listed twice");
      const json& joints = joint_array(person, "joints", line_no);
      const BodyPose pose = pose_from(person, line_no);
      if (out.header.sensor == SensorKind::kLidar3D) {
        note_unknown(person, {"id", "joints", "body_pose"}, "person", line_no, seen, out.warnings);
        auto& track = out.tracks3d[it->second];
        for (std::size_t j = 0; j < kJointCount; ++j) track.joints[frame][j] = vector_at<3>(joints[j], line_no, "joint");
        track.body_pose[frame] = pose;
        track.valid[frame] = true;
      } else {
        note_unknown(person, {"id", "joints", "confidence", "body_pose"}, "person", line_no, seen, out.warnings);
        auto& track = out.tracks2d[it->second];
        const json& conf = joint_array(person, "confidence", line_no);
        for (std::size_t j = 0; j < kJointCount; ++j) {
          track.joints[frame][j] = vector_at<2>(joints[j], line_no, "joint");
          const double c = number_at(conf[j], line_no, "confidence");
          if (!(c >= 0.0)) fail(StreamErrorKind::kMalformedRecord, line_no, "confidence must be >= 0");
          track.confidence[frame][j] = c;
        }
        track.body_pose[frame] = pose;
        track.valid[frame] = true;
      }
    }
  }
  if (!have_header) fail(StreamErrorKind::kMalformedHeader, 1, "empty stream");
  return out;
}

StreamFile parse_stream(const std::string& path) { return parse_stream_text(read_file(path)); }

std::string format_stream(const StreamFile& stream) {
  const StreamHeader& h = stream.header;
  json header = {{"format", kStreamFormat},
                 {"version", kStreamFormatVersion},
                 {"sensor", to_string(h.sensor)},
                 {"frame_rate", h.frame_rate},
                 {"skeleton_hash", h.skeleton_hash},
                 {"frames", h.frames},
                 {"persons", h.person_ids},
                 {"config", h.config}};
  if (h.sensor == SensorKind::kCamera2D) {
    if (!h.intrinsics) throw DataError("camera stream without intrinsics");
    header["intrinsics"] = intrinsics_to_json(*h.intrinsics);
  }
  std::string out = header.dump() + "\n";
  for (std::size_t t = 0; t < h.frames; ++t) {
    json persons = json::array();
    if (h.sensor == SensorKind::kLidar3D) {
      for (const auto& track : stream.tracks3d) {
        if (!track.valid[t]) continue;
        json joints = json::array();
        json pose = json::array();
        for (std::size_t j = 0; j < kJointCount; ++j) {
          const Vec3& x = track.joints[t][j];
          joints.push_back({x.x(), x.y(), x.z()});
          pose.push_back(rotation_to_json(track.body_pose[t].rotations[j]));
        }
        persons.push_back({{"id", track.person_id}, {"joints", joints}, {"body_pose", pose}});
      }
    } else {
      for (const auto& track : stream.tracks2d) {
        if (!track.valid[t]) continue;
        json joints = json::array();
        json pose = json::array();
        for (std::size_t j = 0; j < kJointCount; ++j) {
          const Vec2& x = track.joints[t][j];
          joints.push_back({x.x(), x.y()});
          pose.push_back(rotation_to_json(track.body_pose[t].rotations[j]));
        }
        persons.push_back({{"id", track.person_id},
                           {"joints", joints},
                           {"confidence", track.confidence[t]},
                           {"body_pose", pose}});
      }
    }
    const double time = t < stream.times.size() ? stream.times[t] : static_cast<double>(t) / h.frame_rate;
    out += json{{"frame", t}, {"time", time}, {"persons", persons}}.dump() + "\n";
  }
  return out;
}

void write_stream(const StreamFile& stream, const std::string& path) { write_file(path, format_stream(stream)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoFailure("failed reading " + path);
  return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoFailure("failed writing " + path);
}

}  // namespace xalign
