#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "icpkit/alignment.hpp"
#include "icpkit/errors.hpp"
#include "icpkit/icp.hpp"
#include "icpkit/io.hpp"
#include "icpkit/random.hpp"
#include "icpkit/report.hpp"
#include "icpkit/slam.hpp"
#include "icpkit/version.hpp"

namespace icpkit {
namespace cli {

struct RegisterArgs {
  std::string source;
  std::string dest;
  std::string metric = "p2p";
  double theta0 = 1e-10;
  std::size_t max_iter = 100;
  double trim = 0.0;
  double max_dist = 0.0;
  std::size_t pyramid = 0;
  std::uint64_t seed = 0;
  std::string report_path;
  std::string out_path;
  bool trim_set = false;
  bool max_dist_set = false;
};

struct SlamArgs {
  std::string world;
  std::string trajectory;
  std::string mode = "online";
  std::string match = "nonlandmark";
  std::uint64_t seed = 0;
  std::string report_path;
};

struct FilterArgs {
  std::size_t cells = 0;
  std::string steps_path;
  std::string report_path;
};

struct BenchArgs {
  std::size_t size = 1000;
  std::size_t reps = 3;
};

inline int run_register(const RegisterArgs& args) {
  detail::StageTimer read_timer;
  PointCloud source = read_cloud(args.source);
  PointCloud dest = read_cloud(args.dest);
  const double read_ms = read_timer.elapsed_ms();

  IcpConfig config;
  if (args.metric == "p2p") config.metric = MetricKind::PointToPoint;
  if (args.metric == "p2l") config.metric = MetricKind::PointToLine;
  if (args.metric == "p2plane") config.metric = MetricKind::PointToPlane;
  config.theta0 = args.theta0;
  config.max_iterations = args.max_iter;
  config.pyramid_levels = args.pyramid;
  config.seed = args.seed;
  if (args.trim_set) config.rejection = RejectionPolicy::trim(args.trim);
  if (args.max_dist_set)
    config.rejection = RejectionPolicy::max_dist(args.max_dist);

  bool normals_estimated = false;
  if (config.metric == MetricKind::PointToPlane && !dest.has_normals()) {
    dest = estimate_normals(dest, std::min<std::size_t>(10, dest.size()));
    normals_estimated = true;
  }

  const IcpResult result = run_icp(source, dest, config);

  double write_ms = 0.0;
  if (!args.out_path.empty() &&
      result.termination != Termination::NoCorrespondences) {
    detail::StageTimer write_timer;
    write_cloud(apply(result.transform, source), args.out_path);
    write_ms = write_timer.elapsed_ms();
  }

  if (!args.report_path.empty()) {
    Json report = make_register_report(config, result);
    report["config"]["source"] = args.source;
    report["config"]["dest"] = args.dest;
    report["config"]["normals_estimated"] = normals_estimated;
    report[kTimingsKey]["read_files"] = read_ms;
    report[kTimingsKey]["write_cloud"] = write_ms;
    save_report(report, args.report_path);
  }

  if (result.termination == Termination::NoCorrespondences) {
    std::cerr << "error: NoCorrespondences: rejection removed every "
                 "candidate pair\n";
    return 2;
  }

  std::cout << "termination: " << to_string(result.termination) << "\n"
            << "iterations: " << result.iterations << "\n";
  if (!result.error_trace.empty())
    std::cout << "final_error: " << result.error_trace.back() << "\n";
  std::cout << "rotation:";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) std::cout << " " << result.transform.R(r, c);
  std::cout << "\ntranslation: " << result.transform.t.x() << " "
            << result.transform.t.y() << " " << result.transform.t.z()
            << "\n";
  return 0;
}

inline int run_slam(const SlamArgs& args) {
  const World world = load_world(args.world);
  const std::vector<Pose2> trajectory = load_trajectory(args.trajectory);

  SensorModel sensor;
  sensor.n_beams = 180;
  sensor.fov = 2.0 * M_PI;
  sensor.max_range = 10.0;
  sensor.noise_sigma = 0.005;
  sensor.landmark_radius = 0.15;
  sensor.seed = args.seed;

  SlamOptions options;
  options.mode =
      args.match == "landmark" ? MatchMode::Landmark : MatchMode::NonLandmark;
  options.icp.theta0 =
      std::max(1e-12, 20.0 * sensor.noise_sigma * sensor.noise_sigma);
  options.icp.max_iterations = 50;
  options.icp.seed = args.seed;

  const SlamReport report =
      args.mode == "offline"
          ? run_offline(world, trajectory, sensor, options)
          : run_online(world, trajectory, sensor, options);

  if (!args.report_path.empty()) {
    Json echo;
    echo["world"] = args.world;
    echo["trajectory"] = args.trajectory;
    echo["mode"] = args.mode;
    echo["match"] = args.match;
    echo["seed"] = args.seed;
    Json sj;
    sj["n_beams"] = sensor.n_beams;
    sj["fov"] = sensor.fov;
    sj["max_range"] = sensor.max_range;
    sj["noise_sigma"] = sensor.noise_sigma;
    sj["landmark_radius"] = sensor.landmark_radius;
    echo["sensor"] = std::move(sj);
    echo["icp"] = icp_config_to_json(detail::effective_icp(options));
    save_report(make_slam_report(echo, report), args.report_path);
  }

  std::cout << "frames: " << report.estimated.size() << "\n"
            << "keyframes: " << report.keyframes.size() << "\n"
            << "closures: " << report.closures.size() << "\n"
            << "ate: " << report.ate << "\n";
  return 0;
}

inline int run_filter(const FilterArgs& args) {
  std::ifstream in(args.steps_path);
  if (!in) throw IoError("cannot open '" + args.steps_path + "' for reading");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("steps file: ") + e.what());
  }

  GridBelief belief;
  belief.cell_size = doc.value("cell_size", 1.0);
  belief.width = doc.value("width", std::size_t{0});
  if (doc.contains("initial")) {
    belief.cells = doc.at("initial").get<std::vector<double>>();
    if (belief.cells.size() != args.cells)
      throw Error("InvalidModel", "initial belief length does not match --cells");
    double sum = 0.0;
    for (double v : belief.cells) sum += v;
    if (sum <= 0.0) throw Error("InvalidModel", "initial belief has no mass");
    for (double& v : belief.cells) v /= sum;
  } else {
    const GridBelief u = uniform_belief(args.cells, belief.cell_size, belief.width);
    belief.cells = u.cells;
  }

  MotionModel motion;
  for (const auto& [name, taps] : doc.at("kernels").items()) {
    ShiftKernel kernel;
    for (const auto& tap : taps) {
      if (tap.size() == 2)
        kernel.taps.push_back({tap[0].get<int>(), 0, tap[1].get<double>()});
      else if (tap.size() == 3)
        kernel.taps.push_back(
            {tap[0].get<int>(), tap[1].get<int>(), tap[2].get<double>()});
      else
        throw Error("InvalidModel",
                    "kernel taps need [dx,p] or [dx,dy,p] entries");
    }
    motion.kernels[name] = std::move(kernel);
  }

  MeasurementModel meas;
  for (const auto& [name, lik] : doc.at("likelihoods").items()) {
    meas.likelihoods[name] = lik.get<std::vector<double>>();
    if (meas.likelihoods[name].size() != args.cells)
      throw Error("InvalidModel",
                  "likelihood '" + name + "' length does not match --cells");
  }

  std::vector<std::pair<std::string, std::string>> steps;
  for (const auto& step : doc.at("steps")) {
    if (!step.is_array() || step.size() != 2)
      throw Error("InvalidModel", "each step needs [command, observation]");
    steps.emplace_back(step[0].get<std::string>(), step[1].get<std::string>());
  }

  const std::vector<GridBelief> trace = filter_run(belief, steps, motion, meas);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    std::cout << "step " << (k + 1) << " [" << steps[k].first << ", "
              << steps[k].second << "]:";
    for (double v : trace[k].cells)
      std::cout << " " << detail::format_double(v);
    std::cout << "\n";
  }

  if (!args.report_path.empty()) {
    Json echo;
    echo["cells"] = args.cells;
    echo["steps_file"] = args.steps_path;
    echo["steps"] = steps.size();
    save_report(make_filter_report(echo, trace), args.report_path);
  }
  return 0;
}

inline int run_bench(const BenchArgs& args) {
  constexpr std::uint64_t kBenchSeed = 0;
  double sum_total = 0.0;
  for (std::size_t rep = 0; rep < args.reps; ++rep) {
    Rng rng(mix_seed(kBenchSeed + rep * 0x9e3779b97f4a7c15ull));
    PointCloud cloud;
    cloud.points.reserve(args.size);
    for (std::size_t i = 0; i < args.size; ++i)
      cloud.points.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                rng.uniform(-1.0, 1.0));
    Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
    if (axis.norm() == 0.0) axis = Vec3::UnitZ();
    const double angle = rng.uniform(0.0, M_PI / 6.0);
    const RigidTransform truth{
        rotation_axis_angle(axis, angle),
        Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
             rng.uniform(-0.5, 0.5))};
    const PointCloud dest = apply(truth, cloud);

    IcpConfig config;
    config.rejection = RejectionPolicy::none();
    const IcpResult result = run_icp(cloud, dest, config);
    sum_total += result.timings.total_ms;
    std::cout << "rep " << rep << ": size " << args.size << ", iterations "
              << result.iterations << ", match " << result.timings.match_ms
              << " ms, solve " << result.timings.solve_ms << " ms, error "
              << result.timings.error_ms << " ms, total "
              << result.timings.total_ms << " ms\n";
  }
  if (args.reps > 0)
    std::cout << "mean total: " << sum_total / static_cast<double>(args.reps)
              << " ms\n";
  return 0;
}

inline int main(int argc, const char* const* argv) {
  CLI::App app{"rigid point-cloud registration toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RegisterArgs reg;
  CLI::App* reg_cmd =
      app.add_subcommand("register", "align a source cloud onto a destination");
  reg_cmd->add_option("source", reg.source, "source cloud file")->required();
  reg_cmd->add_option("dest", reg.dest, "destination cloud file")->required();
  reg_cmd->add_option("--metric", reg.metric, "error metric")
      ->check(CLI::IsMember({"p2p", "p2l", "p2plane"}));
  reg_cmd->add_option("--theta0", reg.theta0, "convergence threshold (m^2)");
  reg_cmd->add_option("--max-iter", reg.max_iter, "iteration cap");
  CLI::Option* trim_opt =
      reg_cmd->add_option("--trim", reg.trim, "trimmed fraction in [0,1)")
          ->check(CLI::Range(0.0, 1.0));
  CLI::Option* maxd_opt = reg_cmd->add_option("--max-dist", reg.max_dist,
                                              "pair distance cap (m)");
  trim_opt->excludes(maxd_opt);
  maxd_opt->excludes(trim_opt);
  reg_cmd->add_option("--pyramid", reg.pyramid, "multi-resolution levels");
  reg_cmd->add_option("--seed", reg.seed, "random seed");
  reg_cmd->add_option("--report", reg.report_path, "write a JSON run report");
  reg_cmd->add_option("--out", reg.out_path, "write the transformed source");

  SlamArgs slam;
  CLI::App* slam_cmd =
      app.add_subcommand("slam-sim", "synthetic 2D scan-matching run");
  slam_cmd->add_option("--world", slam.world, "world JSON file")->required();
  slam_cmd->add_option("--trajectory", slam.trajectory, "trajectory CSV file")
      ->required();
  slam_cmd->add_option("--mode", slam.mode, "pipeline mode")
      ->check(CLI::IsMember({"online", "offline"}));
  slam_cmd->add_option("--match", slam.match, "matching mode")
      ->check(CLI::IsMember({"landmark", "nonlandmark"}));
  slam_cmd->add_option("--seed", slam.seed, "random seed");
  slam_cmd->add_option("--report", slam.report_path, "write a JSON run report");

  FilterArgs filter;
  CLI::App* filter_cmd =
      app.add_subcommand("filter-demo", "grid Bayes filter demo");
  filter_cmd->add_option("--cells", filter.cells, "grid cell count")
      ->required();
  filter_cmd->add_option("--steps", filter.steps_path, "steps JSON file")
      ->required();
  filter_cmd->add_option("--report", filter.report_path,
                         "write a JSON run report");

  BenchArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "time registration on synthetic clouds");
  bench_cmd->add_option("--size", bench.size, "points per cloud");
  bench_cmd->add_option("--reps", bench.reps, "repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (reg_cmd->parsed()) {
      reg.trim_set = trim_opt->count() > 0;
      reg.max_dist_set = maxd_opt->count() > 0;
      return run_register(reg);
    }
    if (slam_cmd->parsed()) return run_slam(slam);
    if (filter_cmd->parsed()) return run_filter(filter);
    if (bench_cmd->parsed()) return run_bench(bench);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cli
}  // namespace icpkit
