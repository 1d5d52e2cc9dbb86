#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "xalign/errors.hpp"
#include "xalign/harness.hpp"

using namespace xalign;

namespace {

BenchSpec tiny_spec() {
  BenchSpec spec;
  spec.person_counts = {3};
  spec.noise_levels = {1.0};
  spec.seeds = {0, 1};
  spec.modes.assign(kAllAblationModes.begin(), kAllAblationModes.end());
  spec.scene.frames = 12;
  spec.scene.joint3d_noise_sigma = 0.05;
  return spec;
}

}  // namespace

TEST_CASE("bench spec validation") {
  BenchSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.modes.clear();
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
  CHECK_THROWS_AS(run_bench(spec), InvalidSpec);
  spec = BenchSpec{};
  spec.seeds.clear();
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
  spec = BenchSpec{};
  spec.repetitions = 0;
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
}

TEST_CASE("run_bench: one row per cell and mode") {
  const MetricsReport r = run_bench(tiny_spec());
  REQUIRE(r.rows.size() == 6);
  for (const auto& row : r.rows) {
    CAPTURE(row.mode);
    CHECK(row.scenes == 2);
    CHECK(row.accuracy_mean >= 0.0);
    CHECK(row.accuracy_mean <= 1.0);
    CHECK(row.fps > 0.0);
    CHECK(r.mode_seconds.count(row.mode) == 1);
  }
  CHECK(r.refinement.trials > 0);
  CHECK(r.refinement.refined_error_mean <= r.refinement.input_error_mean);
}

TEST_CASE("run_bench: accuracy is independent of thread count") {
  BenchSpec spec = tiny_spec();
  spec.modes = {AblationMode::kPose, AblationMode::kFull};
  const MetricsReport one = run_bench(spec);
  spec.threads = 3;
  const MetricsReport three = run_bench(spec);
  REQUIRE(one.rows.size() == three.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    CHECK(one.rows[i].accuracy_mean == three.rows[i].accuracy_mean);
    CHECK(one.rows[i].accuracy_std == three.rows[i].accuracy_std);
  }
  CHECK(one.refinement == three.refinement);
}

TEST_CASE("report: round trip through text is exact") {
  MetricsReport r;
  MetricsRow row;
  row.mode = "P&T&K";
  row.person_count = 10;
  row.pixel_noise = 0.1;
  row.synchronized = true;
  row.scenes = 200;
  row.failures = 1;
  row.accuracy_mean = 1.0 / 3.0;
  row.accuracy_std = std::nextafter(0.2, 1.0);
  row.timed_frames = 32;
  row.seconds = 1e-7;
  row.fps = 123456.789;
  r.rows.push_back(row);
  row.mode = "KPs";
  row.accuracy_mean = 0.0;
  r.rows.push_back(row);
  r.refinement = {100, 0.05, 0.0123456789, 0.97};
  r.mode_seconds = {{"KPs", 2.5}, {"P&T&K", 0.1}};
  r.failures = {"KPs 10 0.1 1 3: exhaustive search is limited, \"quoted\""};
  r.config = R"({"pcm":{"delta":100}})";
  const std::string text = format_report(r);
  CHECK(parse_report(text) == r);
  CHECK(text.rfind("schema,xalign-bench-report,1\n", 0) == 0);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("report: malformed input is a DataError") {
  CHECK_THROWS_AS(parse_report(""), DataError);
  CHECK_THROWS_AS(parse_report("schema,other,1\n"), DataError);
  const std::string good = format_report(MetricsReport{});
  CHECK(parse_report(good) == MetricsReport{});
  std::string bad = good;
  bad.insert(bad.find('\n') + 1, "garbage\n");
  CHECK_THROWS_AS(parse_report(bad), DataError);
}

TEST_CASE("report: export to an unwritable path is an IoFailure") {
  CHECK_THROWS_AS(export_report(MetricsReport{}, "/nonexistent-dir/x/report.csv"), IoFailure);
  const auto path = std::filesystem::temp_directory_path() / "xalign_report_test.csv";
  export_report(MetricsReport{}, path.string());
  CHECK(std::filesystem::exists(path));
  std::filesystem::remove(path);
}
