#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xalign/commands.hpp"
#include "xalign/errors.hpp"

namespace {

constexpr const char* kVersion = "xalign 1.0.0";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-to-camera multi-person keypoint alignment"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string mode_name = "P&T&K";
  std::string lidar;
  std::vector<std::string> inputs;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
    auto* o = sub->add_option("--out", out, "output path or directory");
    if (out_required) o->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* match = app.add_subcommand("match", "match LiDAR persons to camera persons");
  add_common(match, true);
  match->add_option("--mode", mode_name, "P&T&K, P&T, P&K, Pose, KP or KPs");
  match->add_option("lidar", lidar, "LiDAR stream")->required();
  match->add_option("cameras", inputs, "camera streams")->required();

  auto* refine = app.add_subcommand("refine", "refine LiDAR joints with matched cameras");
  add_common(refine, true);
  refine->add_option("lidar", lidar, "LiDAR stream")->required();
  refine->add_option("matches", inputs, "match outputs")->required();

  auto* simulate = app.add_subcommand("simulate", "write a synthetic scene");
  add_common(simulate, true);

  auto* bench = app.add_subcommand("bench", "run the ablation benchmark");
  add_common(bench, true);

  app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("version")) {
      std::cout << kVersion << "\n";
      return 0;
    }
    xalign::AppConfig config = xalign::AppConfig::load(config_path);
    if (seed) {
      config.scene.seed = *seed;
      config.pcm.seed = *seed;
    }
    if (app.got_subcommand(match)) {
      xalign::MatchOptions options{xalign::parse_ablation_mode(mode_name), threads};
      return xalign::cmd_match(lidar, inputs, config, out, options, std::cerr);
    }
    if (app.got_subcommand(refine)) {
      xalign::cmd_refine(lidar, inputs, config, out, std::cerr);
    } else if (app.got_subcommand(simulate)) {
      xalign::cmd_simulate(config, out, std::cerr);
    } else {
      xalign::cmd_bench(config, out, threads, std::cerr);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return xalign::exit_code_for(e);
  }
}
