#pragma once

#include <cstdint>
#include <vector>

#include "gridflow/grid_map.hpp"
#include "gridflow/losses.hpp"
#include "gridflow/rigid_transform.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct SynthConfig {
  int frames = 2;
  GridConfig grid{19.2, 19.2, 0.15, {0.0, 0.0, 1.8}};

  // Per-frame ego motion in the ego frame, sampled independently per step.
  Range ego_forward_m{0.3, 1.0};
  Range ego_lateral_m{-0.1, 0.1};
  Range ego_yaw_deg{-3.0, 3.0};
  // Random placement of the initial ego pose in the world.
  Range start_yaw_deg{-10.0, 10.0};
  Range start_offset_m{-3.5, 3.5};

  int walls = 20;
  int pillars = 30;
  int clutter = 200;
  double world_radius_m = 16.0;
  double point_spacing_m = 0.05;

  int objects = 1;
  Range object_speed_m{0.2, 0.8};
  Range object_yaw_rate_deg{0.0, 0.0};
  double object_length_m = 4.2;
  double object_width_m = 1.8;
  // Footprint inflation used for labeling and background clearing.
  double object_margin_m = 0.3;

  double noise_sigma_m = 0.02;

  void validate() const;
};

struct SceneObject {
  std::vector<LidarPoint> points;        // object frame
  std::vector<RigidTransform2D> poses;   // world pose per frame
  double length_m = 0.0;
  double width_m = 0.0;
};

struct Scenario {
  std::uint64_t seed = 0;
  SynthConfig config;
  std::vector<RigidTransform2D> ego_poses;  // world pose of the ego per frame
  std::vector<LidarPoint> background;       // world frame
  std::vector<SceneObject> objects;

  int frames() const { return static_cast<int>(ego_poses.size()); }
};

/// Axis-aligned box in cell index coordinates.
struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  friend bool operator==(const Box&, const Box&) = default;
};

struct ObjectBox {
  int id = 0;
  Box box;
};

struct GroundTruth {
  FlowField flow;                       // 2<-1
  RigidTransform2D transform_fw;        // 2<-1, centered cells
  RigidTransform2D transform_bw;        // 1<-2 (the ego motion), centered cells
  Field<std::uint8_t> moving;           // object footprint cells in frame 1
  std::vector<ObjectBox> boxes1;
  std::vector<ObjectBox> boxes2;
};

Scenario generate_scenario(std::uint64_t seed, const SynthConfig& cfg);

/// Ego-frame clouds; noise is seeded from the scenario seed and frame index.
std::vector<PointCloud> render_frames(const Scenario& scenario);
PointCloud render_frame(const Scenario& scenario, int frame, double noise_sigma_m);

/// Relative motion between frames k and k+1 in meters, as the 2<-1 mapping.
RigidTransform2D true_relative_transform(const Scenario& scenario, int pair);

GroundTruth ground_truth_flow(const Scenario& scenario, int pair, const GridConfig& grid);

std::vector<ObjectBox> object_boxes(const Scenario& scenario, int frame, const GridConfig& grid);

}  // namespace gridflow
