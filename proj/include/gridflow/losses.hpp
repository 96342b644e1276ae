#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gridflow/field.hpp"
#include "gridflow/grid_map.hpp"
#include "gridflow/rigid_transform.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

enum class MaskKind : std::uint8_t { kData, kMotion, kSpatial };

/// Per-cell weight in [0, 1].
struct Mask {
  ScalarField weights;
  MaskKind kind = MaskKind::kData;

  static Mask uniform(int rows, int cols, MaskKind kind, double value = 1.0) {
    return {ScalarField(rows, cols, value), kind};
  }
  int rows() const { return weights.rows(); }
  int cols() const { return weights.cols(); }
};

inline constexpr double kCharbonnierEpsilon = 1e-3;
inline constexpr double kCharbonnierExponent = 0.45;

/// Generalized Charbonnier penalty rho(x) = (x + 1e-3)^0.45 for x >= 0.
double charbonnier(double x);
double charbonnier_derivative(double x);

/// eps(m) = rho((1 - m)^2); keeps masks from collapsing to zero.
double mask_regularizer(double m);
double mask_regularizer_derivative(double m);

struct OcclusionParams {
  double alpha1 = 0.01;
  double alpha2 = 0.5;
};

/// Forward-backward consistency check on the grid of `flow`: 1 where
/// consistent, 0 where occluded or mapped out of bounds.
Mask occlusion_mask(const FlowField& flow, const FlowField& reverse_flow, const OcclusionParams& params = {});

/// Sum over valid cells of m * rho(|r|^2) (robust) and eps(m) (regularizer).
struct TermValue {
  double robust = 0.0;
  double regularizer = 0.0;
  int cells = 0;

  double value(double lambda_reg) const { return robust + lambda_reg * regularizer; }
};

struct DataLoss {
  TermValue term;
  // Per layer, p_src(x) - p_tgt(x + d(x)); zero on invalid cells.
  std::vector<ScalarField> residuals;
};

/// Layers are paired by position and must carry the same names.
DataLoss data_loss(const GridMap& source, const GridMap& target, const FlowField& flow, const Mask& mask,
                   const ValidSet& valid);

/// motion_flow - flow, per cell.
Field<Vec2> motion_residual(const FlowField& flow, const FlowField& motion_flow);
TermValue motion_loss(const Field<Vec2>& residuals, const Mask& mask, const ValidSet& valid);

enum class StencilMode : std::uint8_t {
  kSecondDifference,       // f(x-1) - 2 f(x) + f(x+1)
  kCentralFirstDifference  // (f(x+1) - f(x-1)) / 2
};

/// Responses ordered {u along x, u along y, v along x, v along y}; zero on
/// border cells.
using SpatialResponse = Field<std::array<double, 4>>;

SpatialResponse spatial_residual(const FlowField& flow, StencilMode mode = StencilMode::kSecondDifference);
TermValue spatial_loss(const SpatialResponse& responses, const Mask& mask, const ValidSet& valid);

struct LossWeights {
  double data = 1.0;
  double motion = 1.0;
  double spatial = 1.0;
  double reg = 1.0;

  void validate() const;
};

struct DirectionMasks {
  Mask data;
  Mask motion;
  Mask spatial;
};

struct LossOptions {
  StencilMode stencil = StencilMode::kSecondDifference;
  // Recompute the motion mask from the current flow inside the loss and
  // differentiate through it; otherwise the supplied motion mask is constant.
  bool differentiable_motion_mask = false;
};

/// Everything the objective depends on. `valid_fw` lives on frame 1,
/// `valid_bw` on frame 2. The valid sets stay fixed while the flow moves, so
/// the data term samples the target with clamp-to-edge.
struct LossProblem {
  const GridMap& map1;
  const GridMap& map2;
  const FlowField& flow_fw;
  const FlowField& flow_bw;
  const DirectionMasks& masks_fw;
  const DirectionMasks& masks_bw;
  const RigidTransform2D& transform_fw;
  const RigidTransform2D& transform_bw;
  const ValidSet& valid_fw;
  const ValidSet& valid_bw;
  LossWeights weights{};
  LossOptions options{};
};

struct DirectionBreakdown {
  TermValue data;
  TermValue motion;
  TermValue spatial;
  int valid_cells = 0;

  double weighted(const LossWeights& w) const;
};

struct LossBreakdown {
  DirectionBreakdown forward;
  DirectionBreakdown backward;
  LossWeights weights;
  double total = 0.0;
};

struct LossGradient {
  Field<Vec2> forward;
  Field<Vec2> backward;
};

struct LossEvaluation {
  LossBreakdown breakdown;
  LossGradient gradient;  // empty unless requested
};

/// Valid sets of both directions from occupancies and the current flows.
std::array<ValidSet, 2> valid_sets(const ValidSet& occupancy1, const ValidSet& occupancy2, const FlowField& flow_fw,
                                   const FlowField& flow_bw);

LossEvaluation evaluate_loss(const LossProblem& problem, bool with_gradient);
LossBreakdown total_loss(const LossProblem& problem);
LossGradient loss_gradient(const LossProblem& problem);

}  // namespace gridflow
