#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "xalign/errors.hpp"
#include "xalign/hash.hpp"
#include "xalign/geometry.hpp"
#include "skeleton_data.inc"

namespace xalign {
namespace {

std::string format_shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

CanonicalSkeleton CanonicalSkeleton::parse(std::string_view text) {
  CanonicalSkeleton s;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t joint = 0;
  bool have_header = false;
  std::string canonical;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    if (!have_header) {
      std::string tag;
      if (!(fields >> tag >> s.version_) || tag != "skeleton")
        throw InvalidConfig("skeleton line " + std::to_string(line_no) + ": expected 'skeleton <version>'");
      have_header = true;
      canonical += "skeleton " + std::to_string(s.version_) + "\n";
      continue;
    }
    if (joint >= kJointCount)
      throw InvalidConfig("skeleton line " + std::to_string(line_no) + ": more than 24 joints");
    std::string name;
    int parent = 0;
    double x = 0, y = 0, z = 0;
    if (!(fields >> name >> parent >> x >> y >> z))
      throw InvalidConfig("skeleton line " + std::to_string(line_no) + ": expected '<name> <parent> <x> <y> <z>'");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw InvalidConfig("skeleton line " + std::to_string(line_no) + ": non-finite offset");
    const bool root = joint == 0;
    if (root ? parent != -1 : (parent < 0 || parent >= static_cast<int>(joint)))
      throw InvalidConfig("skeleton line " + std::to_string(line_no) +
                          ": parent must be -1 for the root and an earlier joint otherwise");
    s.names_[joint] = name;
    s.parents_[joint] = parent;
    s.offsets_[joint] = Vec3(x, y, z);
    canonical += name + " " + std::to_string(parent) + " " + format_shortest(x) + " " + format_shortest(y) + " " +
                 format_shortest(z) + "\n";
    ++joint;
  }
  if (!have_header) throw InvalidConfig("skeleton: missing 'skeleton <version>' line");
  if (joint != kJointCount)
    throw InvalidConfig("skeleton: expected 24 joints, found " + std::to_string(joint));
  if (!s.offsets_[0].isZero()) throw InvalidConfig("skeleton: root offset must be zero");

  s.hash_ = hex64(fnv1a64(canonical));
  return s;
}

CanonicalSkeleton CanonicalSkeleton::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open skeleton file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const CanonicalSkeleton& CanonicalSkeleton::builtin() {
  static const CanonicalSkeleton skeleton = parse(kBuiltinSkeletonText);
  return skeleton;
}

Joints3 CanonicalSkeleton::rest_positions() const {
  Joints3 out;
  out[0] = Vec3::Zero();
  for (std::size_t i = 1; i < kJointCount; ++i) out[i] = out[static_cast<std::size_t>(parents_[i])] + offsets_[i];
  return out;
}

}  // namespace xalign
