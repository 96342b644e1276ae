#pragma once

#include <vector>

#include "gridflow/grid_map.hpp"
#include "gridflow/rigid_transform.hpp"
#include "gridflow/synth.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

/// Absolute planar poses in meters; poses[0] is the identity.
struct Trajectory {
  std::vector<RigidTransform2D> poses;

  std::size_t size() const { return poses.size(); }
};

/// Composes per-pair motions into a trajectory. 2<-1 transforms are the
/// inverse ego motion and get inverted; 1<-2 transforms are used as is.
/// Translations are scaled from cells to meters by `cell_size_m`.
Trajectory chain(const std::vector<RigidTransform2D>& transforms, double cell_size_m);

/// Desk-scale default subsequence lengths, 5..40 m.
std::vector<double> default_eval_lengths();
std::vector<double> kitti_eval_lengths();

struct LengthMetrics {
  double length_m = 0.0;
  double are = 0.0;  // rad/m
  double ate = 0.0;  // fraction
  int samples = 0;
};

struct OdometryMetrics {
  double are = 0.0;  // rad/m
  double ate = 0.0;  // fraction
  int samples = 0;
  bool empty = true;
  std::vector<LengthMetrics> per_length;

  double are_deg_per_m_e3() const;  // ARE in 1e-3 deg/m
  double ate_percent() const { return 100.0 * ate; }
};

/// Relative-pose errors over every start index and length: a subsequence
/// ends at the first frame whose ref path distance reaches the length.
OdometryMetrics are_ate(const Trajectory& est, const Trajectory& ref, const std::vector<double>& lengths);

struct EpeStats {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  int count = 0;
};

EpeStats endpoint_error(const FlowField& est, const FlowField& gt, const ValidSet& valid);

double iou(const Box& a, const Box& b);

struct ObjectIou {
  int id = 0;
  double iou = 0.0;
  Vec2 mean_flow;
  Box predicted;
};

struct IouReport {
  std::vector<ObjectIou> objects;
  double mean = 0.0;
  int skipped = 0;
};

/// Translates each frame-1 box by the mean flow of its measured cells and
/// scores it against the frame-2 box with the same id.
IouReport object_prediction_iou(const FlowField& flow, const std::vector<ObjectBox>& boxes1,
                                const std::vector<ObjectBox>& boxes2, const GridMap& map1);

}  // namespace gridflow
