#pragma once

#include <cstdint>
#include <vector>

#include "gridflow/losses.hpp"
#include "gridflow/rigid_transform.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

/// Point pairs in centered cell coordinates with weights in [0, 1].
struct WeightedCorrespondences {
  std::vector<Vec2> source;
  std::vector<Vec2> target;
  std::vector<double> weights;
  FlowDirection direction = FlowDirection::kForward;
};

/// Valid cells of `flow` as (x - c) -> (x + d(x) - c) pairs, in row-major
/// order. Weights default to 1.
WeightedCorrespondences correspondences_from_flow(const FlowField& flow, const ValidSet& valid,
                                                  const ScalarField* weights = nullptr);

/// Closed-form weighted least squares: minimizes sum w |R x + t - y|^2.
/// Throws EstimationError on zero total weight or coincident sources.
RigidTransform2D estimate_rigid(const WeightedCorrespondences& corr);

struct IrlsResult {
  RigidTransform2D transform;
  Mask mask;  // final weights; 0 outside the valid set
};

/// Alternates estimate_rigid with reweighting w = 1 - tanh(|r_motion|^2),
/// starting from unit weights on valid cells.
// Residuals are multiplied by `residual_scale` before the mask is applied,
// e.g. to express them in finest-grid cells when running on a coarse level.
IrlsResult irls_estimate(const FlowField& flow, const ValidSet& valid, int iterations, double residual_scale = 1.0);

/// d(x) = R (x - c) + t - (x - c) with c the grid center.
FlowField motion_flow(const RigidTransform2D& transform, int rows, int cols);

/// 1 - tanh(s), evaluated without cancellation for large s.
double motion_mask_value(double squared_norm);
double motion_mask_derivative(double squared_norm);
Mask motion_mask(const Field<Vec2>& residuals);

enum class SpatialMaskMode : std::uint8_t {
  kGradientMagnitude,  // normalized Sobel magnitude of the motion mask
  kComplement          // 1 - normalized magnitude
};

/// 3x3 Sobel (edge-replicated) magnitude normalized by its global maximum.
Mask spatial_mask(const Mask& motion, SpatialMaskMode mode = SpatialMaskMode::kGradientMagnitude);

}  // namespace gridflow
