#include "gridflow/rigid_transform.hpp"

namespace gridflow {

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

RigidTransform2D RigidTransform2D::inverse() const {
  RigidTransform2D inv{-theta, {}, opposite(direction)};
  inv.theta = wrap_angle(inv.theta);
  const Vec2 rt = inv.rotate(t);
  inv.t = {-rt.x, -rt.y};
  return inv;
}

RigidTransform2D compose(const RigidTransform2D& a, const RigidTransform2D& b) {
  return {wrap_angle(a.theta + b.theta), a.rotate(b.t) + a.t, a.direction};
}

}  // namespace gridflow
