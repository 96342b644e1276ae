#pragma once

#include <string>
#include <vector>

#include "gridflow/grid_map.hpp"
#include "gridflow/losses.hpp"
#include "gridflow/rigid_motion.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

struct OptimizerConfig {
  // 0 selects the level count from max_displacement_cells.
  int pyramid_levels = 0;
  double max_displacement_cells = 2.5 / 0.15;
  int steps_per_level = 50;
  int outer_alternations = 20;
  double step_size = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int max_backtracks = 6;
  // Blur sigma in level cells, coarsest level first; the last entry repeats.
  std::vector<double> sigma_schedule{2.0, 1.5, 1.0, 0.5, 0.5};
  LossWeights weights;
  LossOptions loss_options;
  OcclusionParams occlusion;
  bool use_occlusion_mask = true;
  // Coarser levels run with an all-ones data mask.
  bool occlusion_finest_only = true;
  SpatialMaskMode spatial_mask_mode = SpatialMaskMode::kGradientMagnitude;
  int irls_iterations = 3;
  // Stop descending once an accepted step lowers the loss by less than this fraction.
  double tolerance = 1e-7;
  // Multiplies every data-term feature.
  double feature_gain = 1.0;
  // Rescale every blurred pyramid layer to the occupied-cell RMS of the
  // finest unblurred layer, undoing the dilution of thin structures.
  bool normalize_levels = true;
  // Layers entering the data term; reflection_count is fed as log(1 + count).
  std::vector<std::string> feature_layers{std::string(layer::kReflectionCount), std::string(layer::kMinHeight),
                                          std::string(layer::kMaxHeight), std::string(layer::kMeanIntensity)};

  void validate() const;
  int levels() const;
  double sigma_for(int level_from_coarsest) const;
};

struct StepRecord {
  int level = 0;  // 0 = coarsest
  int alternation = 0;
  double total = 0.0;
};

struct FlowResult {
  FlowField flow_fw;
  FlowField flow_bw;
  DirectionMasks masks_fw;
  DirectionMasks masks_bw;
  RigidTransform2D transform_fw;
  RigidTransform2D transform_bw;
  // Loss at the end of every outer alternation.
  std::vector<double> loss_history;
  // Loss after every accepted step (first entry of a block is its start value).
  std::vector<StepRecord> trace;
  LossBreakdown final_breakdown;
  bool converged = false;
};

/// Smallest L with max_displacement / 2^(L-1) <= 2 cells.
int auto_levels(double max_displacement_cells);

/// 2x2 area mean; odd dimensions are padded by edge replication.
ScalarField downsample(const ScalarField& field);
GridMap downsample(const GridMap& map);
/// Half resolution; displacements are halved.
FlowField downsample(const FlowField& flow);
/// Any-occupied reduction of a validity field.
ValidSet downsample(const ValidSet& set);
/// Bilinear resampling to rows x cols (twice the resolution); displacements doubled.
FlowField upsample(const FlowField& flow, int rows, int cols);

/// Data-term features of a raw grid map, in cfg.feature_layers order.
GridMap feature_map(const GridMap& raw, const std::vector<std::string>& layers, double gain = 1.0);

/// Coarse-to-fine estimation of forward and backward flow for a pair of raw
/// grid maps (reflection_count must be present).
FlowResult estimate_flow_pair(const GridMap& map1, const GridMap& map2, const OptimizerConfig& cfg);

}  // namespace gridflow
