#include "gridflow/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridflow/config.hpp"
#include "gridflow/errors.hpp"
#include "gridflow/eval.hpp"
#include "gridflow/io.hpp"
#include "gridflow/pipeline.hpp"

namespace gridflow {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  bool no_blur = false;
  bool no_motion_spatial = false;
  std::optional<std::string> spatial_mask_mode;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "JSON run config; keys left out keep their defaults")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Seed; overrides GRIDFLOW_SEED and the config file");
  sub->add_option("--jobs,-j", o.jobs, "Worker threads for independent pairs, clouds or scenarios")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out,-o", o.out, "Output directory (created if missing)");
  sub->add_flag("--no-blur", o.no_blur, "Disable Gaussian blur of the pyramid levels (B off)");
  sub->add_flag("--no-motion-spatial", o.no_motion_spatial, "Zero the motion and spatial loss weights (M off)");
  sub->add_option("--spatial-mask-mode", o.spatial_mask_mode, "Spatial mask: gradient_magnitude or complement")
      ->check(CLI::IsMember({"gradient_magnitude", "complement"}));
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = run_config_from_json(read_json(o.config_path));
  if (auto env = seed_from_env()) cfg.seed = *env;
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.output_dir = *o.out;
  if (o.no_blur) cfg.flags.blur = false;
  if (o.no_motion_spatial) cfg.flags.motion_spatial = false;
  if (o.spatial_mask_mode) cfg.flags.spatial_mask_mode = spatial_mask_mode_from_string(*o.spatial_mask_mode);
  return cfg;
}

void echo(const RunConfig& cfg, const std::string& command) {
  std::cout << "command: " << command << "\n";
  std::cout << "seed: " << cfg.seed << "\n";
  std::cout << "run config:\n" << to_json(cfg).dump(2) << "\n";
}

fs::path prepare_output(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  // The output directory stays out of the artifact so identical runs match byte for byte.
  Json j = to_json(cfg);
  j.erase("output_dir");
  write_json(cfg.output_dir / "run_config.json", j);
  return cfg.output_dir;
}

std::string indexed(const std::string& prefix, std::size_t i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return prefix + buf + ext;
}

double cell_size_of(const GridMap& a, const GridMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.cell_size() != b.cell_size()) {
    throw ShapeError("grid maps differ in dimensions or cell size");
  }
  return a.cell_size();
}

// --- synth ------------------------------------------------------------------

struct SynthOptions {
  std::optional<int> frames;
  std::optional<int> objects;
  std::optional<double> noise;
  bool stationary = false;
};

void run_synth(RunConfig cfg, const SynthOptions& o) {
  if (o.frames) cfg.synth.frames = *o.frames;
  if (o.objects) cfg.synth.objects = *o.objects;
  if (o.noise) cfg.synth.noise_sigma_m = *o.noise;
  if (o.stationary) {
    cfg.synth.ego_forward_m = {0.0, 0.0};
    cfg.synth.ego_lateral_m = {0.0, 0.0};
    cfg.synth.ego_yaw_deg = {0.0, 0.0};
    cfg.synth.objects = 0;
  }
  cfg.validate();
  echo(cfg, "synth");
  const fs::path out = prepare_output(cfg);

  const SynthConfig sc = cfg.effective_synth();
  const Scenario scenario = generate_scenario(cfg.seed, sc);
  write_json(out / "scenario.json", to_json(scenario));
  const auto clouds = render_frames(scenario);
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    write_point_cloud(out / indexed("cloud_", k, ".bin"), clouds[k]);
    write_json(out / indexed("boxes_", k, ".json"), to_json(object_boxes(scenario, static_cast<int>(k), sc.grid)));
  }
  std::vector<RigidTransform2D> ego_motion;
  for (int k = 0; k + 1 < scenario.frames(); ++k) {
    const GroundTruth gt = ground_truth_flow(scenario, k, sc.grid);
    write_flo(out / indexed("gt_flow_", static_cast<std::size_t>(k), ".flo"), gt.flow);
    ego_motion.push_back(gt.transform_bw.scaled(sc.grid.cell_size_m));
  }
  write_poses(out / "gt_transforms.txt", ego_motion);
  write_poses(out / "poses.txt", chain(ego_motion, 1.0).poses);
  std::cout << "wrote " << clouds.size() << " frames to " << out.generic_string() << "\n";
}

// --- gridmap ----------------------------------------------------------------

void run_gridmap(RunConfig cfg, const std::vector<std::string>& clouds) {
  cfg.inputs.assign(clouds.begin(), clouds.end());
  cfg.validate(1);
  echo(cfg, "gridmap");
  const fs::path out = prepare_output(cfg);
  parallel_for(cfg.inputs.size(), cfg.jobs, [&](std::size_t i) {
    const PointCloud cloud = read_point_cloud(cfg.inputs[i], cfg.grid.sensor_origin);
    GridMap map = build_grid_map(cloud, cfg.grid);
    map.set_frame_id(static_cast<int>(i));
    write_grid_map(out / (cfg.inputs[i].stem().string() + ".gmap"), map);
  });
  std::cout << "wrote " << cfg.inputs.size() << " grid maps (" << cfg.grid.cols() << "x" << cfg.grid.rows()
            << ") to " << out.generic_string() << "\n";
}

// --- flow -------------------------------------------------------------------

struct FlowOptions {
  std::vector<std::string> maps;
  std::string gt;
  double max_norm = 0.0;
};

void run_flow(RunConfig cfg, const FlowOptions& o) {
  cfg.inputs.assign(o.maps.begin(), o.maps.end());
  if (cfg.inputs.size() != 2) throw ParameterError("flow: expected exactly two grid maps");
  cfg.validate(2);
  echo(cfg, "flow");
  const fs::path out = prepare_output(cfg);

  const GridMap map1 = read_grid_map(cfg.inputs[0]);
  const GridMap map2 = read_grid_map(cfg.inputs[1]);
  const double cs = cell_size_of(map1, map2);
  const FlowResult r = estimate_flow_pair(map1, map2, cfg.effective_optimizer());

  write_flo(out / "flow_fw.flo", r.flow_fw);
  write_flo(out / "flow_bw.flo", r.flow_bw);
  write_ppm(out / "flow_fw.ppm", render_flow_hsv(r.flow_fw, o.max_norm));
  write_ppm(out / "flow_bw.ppm", render_flow_hsv(r.flow_bw, o.max_norm));
  for (const auto& [tag, masks] : {std::pair{"fw", &r.masks_fw}, std::pair{"bw", &r.masks_bw}}) {
    write_ppm(out / (std::string("mask_data_") + tag + ".ppm"), render_gray(masks->data.weights));
    write_ppm(out / (std::string("mask_motion_") + tag + ".ppm"), render_gray(masks->motion.weights));
    write_ppm(out / (std::string("mask_spatial_") + tag + ".ppm"), render_gray(masks->spatial.weights));
  }
  write_poses(out / "transform_fw.txt", {r.transform_fw.scaled(cs)});
  write_poses(out / "transform_bw.txt", {r.transform_bw.scaled(cs)});

  Json report;
  report["breakdown"] = to_json(r.final_breakdown);
  report["loss_history"] = r.loss_history;
  report["converged"] = r.converged;
  report["transform_fw_cells"] = to_json(r.transform_fw);
  report["transform_bw_cells"] = to_json(r.transform_bw);
  if (!o.gt.empty()) {
    const FlowField gt = read_flo(o.gt);
    const EpeStats epe = endpoint_error(r.flow_fw, gt, evaluation_mask(map1, gt));
    report["epe_fw"] = to_json(epe);
    std::cout << "EPE vs " << o.gt << ": mean " << epe.mean << " median " << epe.median << " max " << epe.max
              << " over " << epe.count << " cells\n";
  }
  write_json(out / "loss.json", report);
  std::cout << "loss " << r.final_breakdown.total << ", 2<-1 transform (m): " << pose_line(r.transform_fw.scaled(cs))
            << "\n";
}

// --- odometry ---------------------------------------------------------------

struct OdometryOptions {
  std::vector<std::string> maps;
  std::string transforms;
  std::string reference;
  bool kitti_lengths = false;
};

std::string metrics_table(const OdometryMetrics& m) {
  std::string s;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%10s  %10s  %18s  %10s\n", "length m", "samples", "ARE 1e-3 deg/m", "ATE %");
  s += buf;
  for (const auto& l : m.per_length) {
    std::snprintf(buf, sizeof buf, "%10.1f  %10d  %18.4f  %10.4f\n", l.length_m, l.samples,
                  l.are * 180.0 / std::acos(-1.0) * 1e3, 100.0 * l.ate);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "%10s  %10d  %18.4f  %10.4f\n", "all", m.samples, m.are_deg_per_m_e3(),
                m.ate_percent());
  s += buf;
  return s;
}

void run_odometry(RunConfig cfg, const OdometryOptions& o) {
  if (o.kitti_lengths) cfg.eval_lengths = kitti_eval_lengths();
  cfg.inputs.assign(o.maps.begin(), o.maps.end());
  if (o.transforms.empty() == cfg.inputs.empty()) {
    throw ParameterError("odometry: give either grid maps or --transforms, not both");
  }
  cfg.validate(o.transforms.empty() ? 2 : 0);
  echo(cfg, "odometry");
  const fs::path out = prepare_output(cfg);

  std::vector<RigidTransform2D> motions;  // 1<-2, meters
  if (!o.transforms.empty()) {
    motions = read_poses(o.transforms, FlowDirection::kBackward);
  } else {
    std::vector<GridMap> maps(cfg.inputs.size());
    parallel_for(maps.size(), cfg.jobs, [&](std::size_t i) { maps[i] = read_grid_map(cfg.inputs[i]); });
    motions.resize(maps.size() - 1);
    const OptimizerConfig opt = cfg.effective_optimizer();
    parallel_for(motions.size(), cfg.jobs, [&](std::size_t k) {
      const double cs = cell_size_of(maps[k], maps[k + 1]);
      motions[k] = estimate_flow_pair(maps[k], maps[k + 1], opt).transform_bw.scaled(cs);
    });
  }
  write_poses(out / "transforms.txt", motions);
  const Trajectory est = chain(motions, 1.0);
  write_poses(out / "trajectory.txt", est.poses);

  if (o.reference.empty()) {
    std::cout << "trajectory of " << est.size() << " poses written; no reference given\n";
    return;
  }
  Trajectory ref{read_poses(o.reference)};
  const OdometryMetrics m = are_ate(est, ref, cfg.eval_lengths);
  write_json(out / "metrics.json", to_json(m));
  if (m.empty) {
    std::cout << "reference path shorter than every evaluation length; report is empty\n";
  } else {
    std::cout << metrics_table(m);
  }
}

// --- track ------------------------------------------------------------------

struct TrackOptions {
  std::string flow;
  std::string boxes1;
  std::string boxes2;
  std::string map1;
};

void run_track(RunConfig cfg, const TrackOptions& o) {
  cfg.inputs = {o.flow, o.boxes1, o.boxes2, o.map1};
  cfg.validate(4);
  echo(cfg, "track");
  const fs::path out = prepare_output(cfg);
  const FlowField flow = read_flo(o.flow);
  const GridMap map1 = read_grid_map(o.map1);
  const IouReport r = object_prediction_iou(flow, boxes_from_json(read_json(o.boxes1)),
                                            boxes_from_json(read_json(o.boxes2)), map1);
  write_json(out / "iou.json", to_json(r));
  for (const auto& obj : r.objects) {
    std::printf("object %d  IoU %.4f  mean flow (%.3f, %.3f)\n", obj.id, obj.iou, obj.mean_flow.x, obj.mean_flow.y);
  }
  std::printf("mean IoU %.4f over %zu objects, %d skipped\n", r.mean, r.objects.size(), r.skipped);
}

// --- render -----------------------------------------------------------------

void run_render(RunConfig cfg, const std::vector<std::string>& flows, double max_norm) {
  cfg.inputs.assign(flows.begin(), flows.end());
  cfg.validate(1);
  echo(cfg, "render");
  const fs::path out = prepare_output(cfg);
  parallel_for(cfg.inputs.size(), cfg.jobs, [&](std::size_t i) {
    write_ppm(out / (cfg.inputs[i].stem().string() + ".ppm"), render_flow_hsv(read_flo(cfg.inputs[i]), max_norm));
  });
  std::cout << "rendered " << cfg.inputs.size() << " flow field(s)\n";
}

// --- ablate -----------------------------------------------------------------

void run_ablate(RunConfig cfg, int scenarios) {
  if (scenarios < 1) throw ParameterError("ablate: need at least one scenario");
  SynthConfig sc = cfg.effective_synth();
  sc.frames = 2;
  cfg.validate();
  echo(cfg, "ablate");
  const fs::path out = prepare_output(cfg);
  const auto suite = make_suite(cfg.seed, scenarios, sc);
  // The B and M axes come from the variants; the remaining flags still apply.
  RunConfig base = cfg;
  base.flags.blur = true;
  base.flags.motion_spatial = true;
  const auto rows = run_ablation(suite, base.effective_optimizer(), cfg.jobs);
  const std::string table = format_ablation_table(rows);
  write_json(out / "ablation.json", to_json(rows));
  write_file(out / "ablation.txt", std::vector<std::uint8_t>(table.begin(), table.end()));
  std::cout << table;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"gridflow: self-supervised scene flow and odometry on top-view grid maps"};
  app.require_subcommand(1);
  app.footer("Environment: GRIDFLOW_SEED overrides the config-file seed (an explicit --seed wins).");

  CommonOptions common;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario: point clouds, boxes, ground-truth flow and poses");
  add_common(synth, common);
  SynthOptions synth_opts;
  synth->add_option("--frames", synth_opts.frames, "Number of frames (>= 2)");
  synth->add_option("--objects", synth_opts.objects, "Number of moving objects");
  synth->add_option("--noise", synth_opts.noise, "Range noise sigma in meters");
  synth->add_flag("--static", synth_opts.stationary, "No ego motion and no moving objects");

  auto* gridmap = app.add_subcommand("gridmap", "Build grid maps from point clouds");
  add_common(gridmap, common);
  std::vector<std::string> clouds;
  gridmap->add_option("clouds", clouds, "Point cloud files (float32 x, y, z, intensity)")
      ->required()
      ->check(CLI::ExistingFile);

  auto* flow = app.add_subcommand("flow", "Estimate forward and backward flow, masks and transform for a map pair");
  add_common(flow, common);
  FlowOptions flow_opts;
  flow->add_option("maps", flow_opts.maps, "Grid maps of frame 1 and frame 2")
      ->required()
      ->expected(2)
      ->check(CLI::ExistingFile);
  flow->add_option("--gt", flow_opts.gt, "Ground-truth 2<-1 flow (.flo); adds EPE to loss.json")
      ->check(CLI::ExistingFile);
  flow->add_option("--max-norm", flow_opts.max_norm, "Flow norm rendered at full value; 0 = field maximum");

  auto* odometry = app.add_subcommand("odometry", "Chain per-pair motions into a trajectory and score it");
  add_common(odometry, common);
  OdometryOptions odo_opts;
  odometry->add_option("maps", odo_opts.maps, "Grid-map sequence; flow is estimated for each consecutive pair")
      ->check(CLI::ExistingFile);
  odometry->add_option("--transforms", odo_opts.transforms, "Per-pair 1<-2 motions in meters, one pose line each")
      ->check(CLI::ExistingFile);
  odometry->add_option("--reference", odo_opts.reference, "Reference absolute poses, one pose line per frame")
      ->check(CLI::ExistingFile);
  odometry->add_flag("--kitti-lengths", odo_opts.kitti_lengths, "Evaluate over 100..800 m instead of eval_lengths");

  auto* track = app.add_subcommand("track", "Predict frame-2 object boxes from flow and score IoU");
  add_common(track, common);
  TrackOptions track_opts;
  track->add_option("--flow", track_opts.flow, "2<-1 flow (.flo)")->required()->check(CLI::ExistingFile);
  track->add_option("--boxes1", track_opts.boxes1, "Frame-1 boxes (JSON)")->required()->check(CLI::ExistingFile);
  track->add_option("--boxes2", track_opts.boxes2, "Frame-2 boxes (JSON)")->required()->check(CLI::ExistingFile);
  track->add_option("--map1", track_opts.map1, "Frame-1 grid map")->required()->check(CLI::ExistingFile);

  auto* render = app.add_subcommand("render", "Render flow fields as HSV images (PPM)");
  add_common(render, common);
  std::vector<std::string> render_flows;
  double render_max_norm = 0.0;
  render->add_option("flows", render_flows, "Flow files (.flo)")->required()->check(CLI::ExistingFile);
  render->add_option("--max-norm", render_max_norm, "Flow norm rendered at full value; 0 = field maximum");

  auto* ablate = app.add_subcommand("ablate", "Run the blur / motion+spatial ablation on the synthetic suite");
  add_common(ablate, common);
  int ablate_count = 10;
  ablate->add_option("--scenarios", ablate_count, "Suite size; scenario seeds are seed, seed+1, ...");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve(common);
    if (*synth) {
      run_synth(cfg, synth_opts);
    } else if (*gridmap) {
      run_gridmap(cfg, clouds);
    } else if (*flow) {
      run_flow(cfg, flow_opts);
    } else if (*odometry) {
      run_odometry(cfg, odo_opts);
    } else if (*track) {
      run_track(cfg, track_opts);
    } else if (*render) {
      run_render(cfg, render_flows, render_max_norm);
    } else if (*ablate) {
      run_ablate(cfg, ablate_count);
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gridflow
