#pragma once

#include <cstdint>

#include "gridflow/field.hpp"
#include "gridflow/grid_map.hpp"

namespace gridflow {

/// kForward maps frame-1 cells into frame 2 (2<-1); kBackward maps frame-2
/// cells into frame 1 (1<-2).
enum class FlowDirection : std::uint8_t { kForward, kBackward };

FlowDirection opposite(FlowDirection d);
const char* to_string(FlowDirection d);

/// Per-cell displacement d(x) in cells; the mapped coordinate is x + d(x).
struct FlowField {
  Field<Vec2> displacement;
  FlowDirection direction = FlowDirection::kForward;

  FlowField() = default;
  FlowField(int rows, int cols, FlowDirection dir, Vec2 fill = {}) : displacement(rows, cols, fill), direction(dir) {}

  int rows() const { return displacement.rows(); }
  int cols() const { return displacement.cols(); }
  Vec2& operator()(int x, int y) { return displacement(x, y); }
  const Vec2& operator()(int x, int y) const { return displacement(x, y); }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// 1 where a cell participates in the losses.
using ValidSet = Field<std::uint8_t>;

struct Sample {
  double value = 0.0;
  bool in_bounds = false;
};

/// Bilinear interpolation; coordinates outside [0, cols-1] x [0, rows-1]
/// yield {0, false}.
Sample bilinear_sample(const ScalarField& layer, Vec2 coord);

/// Derivative of the bilinear interpolant w.r.t. the sample coordinate.
/// Piecewise constant per cell; zero outside the bounds.
Vec2 sample_gradient(const ScalarField& layer, Vec2 coord);

bool coordinate_in_bounds(int rows, int cols, Vec2 coord);

/// Clamps the coordinate onto the grid before sampling, so the value is
/// continuous across the border. Gradient components along a clamped axis are 0.
double clamped_sample(const ScalarField& layer, Vec2 coord);
Vec2 clamped_sample_gradient(const ScalarField& layer, Vec2 coord);

/// One-sided derivatives of clamped_sample. `lower` is the slope approaching
/// the coordinate from below along each axis, `upper` from above. They differ
/// only on grid lines, where the interpolant has a kink.
struct OneSidedGradient {
  Vec2 lower;
  Vec2 upper;
};
OneSidedGradient clamped_sample_one_sided(const ScalarField& layer, Vec2 coord);

/// reflection_count > 0.
ValidSet occupancy(const GridMap& map);

/// Cells occupied in the source frame whose mapped coordinate lands inside the
/// target frame.
ValidSet valid_set(const ValidSet& source_occupancy, const FlowField& flow);

struct WarpResult {
  GridMap warped;
  ValidSet valid;
};

/// Samples every layer of `target` at x + d(x). Validity here is the in-bounds
/// test only; the overload with source occupancy applies the full rule.
WarpResult warp_backward(const GridMap& target, const FlowField& flow);
WarpResult warp_backward(const GridMap& target, const FlowField& flow, const ValidSet& source_occupancy);

}  // namespace gridflow
