#pragma once

#include <cmath>
#include <numbers>

#include "gridflow/field.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

/// Planar rigid motion y = R(theta) x + t. Inside the optimizer the frame is
/// centered cell coordinates (rotation about the grid center, cell units);
/// trajectories use meters.
struct RigidTransform2D {
  double theta = 0.0;
  Vec2 t;
  FlowDirection direction = FlowDirection::kForward;

  static RigidTransform2D identity(FlowDirection dir = FlowDirection::kForward) { return {0.0, {}, dir}; }

  Vec2 rotate(Vec2 p) const {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
  }
  Vec2 apply(Vec2 p) const { return rotate(p) + t; }

  // Inverse mapping, with the direction tag flipped.
  RigidTransform2D inverse() const;
  RigidTransform2D scaled(double factor) const { return {theta, factor * t, direction}; }

  friend bool operator==(const RigidTransform2D&, const RigidTransform2D&) = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// (this ∘ other): apply `other` first. The direction tag of `a` is kept.
RigidTransform2D compose(const RigidTransform2D& a, const RigidTransform2D& b);

/// Center of a rows x cols grid in cell index coordinates.
inline Vec2 grid_center(int rows, int cols) { return {0.5 * (cols - 1), 0.5 * (rows - 1)}; }

}  // namespace gridflow
