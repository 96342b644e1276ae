#include "gridflow/rigid_motion.hpp"

#include <algorithm>
#include <cmath>

namespace gridflow {

WeightedCorrespondences correspondences_from_flow(const FlowField& flow, const ValidSet& valid,
                                                  const ScalarField* weights) {
  require_same_shape(flow.displacement, valid, "correspondences_from_flow");
  if (weights) require_same_shape(flow.displacement, *weights, "correspondences_from_flow");
  const Vec2 c = grid_center(flow.rows(), flow.cols());
  WeightedCorrespondences corr;
  corr.direction = flow.direction;
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      if (!valid(x, y)) continue;
      const Vec2 src{x - c.x, y - c.y};
      corr.source.push_back(src);
      corr.target.push_back(src + flow(x, y));
      corr.weights.push_back(weights ? (*weights)(x, y) : 1.0);
    }
  }
  return corr;
}

RigidTransform2D estimate_rigid(const WeightedCorrespondences& corr) {
  const std::size_t n = corr.source.size();
  if (corr.target.size() != n || corr.weights.size() != n) {
    throw ShapeError("estimate_rigid: correspondence arrays differ in length");
  }
  double w_sum = 0.0;
  Vec2 mu_x, mu_y;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = corr.weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("estimate_rigid: weights must be finite and >= 0");
    w_sum += w;
    mu_x += w * corr.source[i];
    mu_y += w * corr.target[i];
  }
  if (!(w_sum > 0.0)) throw EstimationError("estimate_rigid: total weight is zero");
  mu_x = (1.0 / w_sum) * mu_x;
  mu_y = (1.0 / w_sum) * mu_y;

  // S = sum w (x - mu_x)(y - mu_y)^T
  double s11 = 0.0, s12 = 0.0, s21 = 0.0, s22 = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = corr.weights[i];
    const Vec2 a = corr.source[i] - mu_x;
    const Vec2 b = corr.target[i] - mu_y;
    s11 += w * a.x * b.x;
    s12 += w * a.x * b.y;
    s21 += w * a.y * b.x;
    s22 += w * a.y * b.y;
    spread += w * a.squared_norm();
  }
  if (!(spread > 1e-12 * w_sum)) throw EstimationError("estimate_rigid: weighted source points coincide");

  RigidTransform2D out;
  out.direction = corr.direction;
  // Maximizes tr(R S) = cos(theta) (S11 + S22) + sin(theta) (S12 - S21).
  out.theta = wrap_angle(std::atan2(s12 - s21, s11 + s22));
  const Vec2 r_mu = out.rotate(mu_x);
  out.t = mu_y - r_mu;
  return out;
}

FlowField motion_flow(const RigidTransform2D& transform, int rows, int cols) {
  FlowField flow(rows, cols, transform.direction);
  const Vec2 c = grid_center(rows, cols);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const Vec2 p{x - c.x, y - c.y};
      flow(x, y) = transform.apply(p) - p;
    }
  }
  return flow;
}

double motion_mask_value(double s) {
  // 1 - tanh(s) = 2 / (1 + e^{2s})
  return 2.0 / (1.0 + std::exp(2.0 * s));
}

double motion_mask_derivative(double s) {
  const double t = std::tanh(s);
  return -(1.0 - t * t);
}

Mask motion_mask(const Field<Vec2>& residuals) {
  Mask m = Mask::uniform(residuals.rows(), residuals.cols(), MaskKind::kMotion, 0.0);
  auto out = m.weights.values();
  auto in = residuals.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!std::isfinite(in[i].x) || !std::isfinite(in[i].y)) throw NumericalError("motion_mask: non-finite residual");
    out[i] = motion_mask_value(in[i].squared_norm());
  }
  return m;
}

IrlsResult irls_estimate(const FlowField& flow, const ValidSet& valid, int iterations, double residual_scale) {
  if (iterations < 1) throw ParameterError("irls_estimate: iterations must be >= 1");
  if (!(residual_scale > 0.0)) throw ParameterError("irls_estimate: residual scale must be > 0");
  require_same_shape(flow.displacement, valid, "irls_estimate");

  ScalarField weights(flow.rows(), flow.cols(), 0.0);
  bool any = false;
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      if (valid(x, y)) {
        weights(x, y) = 1.0;
        any = true;
      }
    }
  }
  if (!any) throw EstimationError("irls_estimate: empty valid set");

  IrlsResult result{RigidTransform2D::identity(flow.direction), Mask{}};
  for (int k = 0; k < iterations; ++k) {
    result.transform = estimate_rigid(correspondences_from_flow(flow, valid, &weights));
    const FlowField model = motion_flow(result.transform, flow.rows(), flow.cols());
    for (int y = 0; y < flow.rows(); ++y) {
      for (int x = 0; x < flow.cols(); ++x) {
        weights(x, y) = valid(x, y) ? motion_mask_value(residual_scale * residual_scale * (model(x, y) - flow(x, y)).squared_norm()) : 0.0;
      }
    }
  }
  result.mask = Mask{std::move(weights), MaskKind::kMotion};
  return result;
}

Mask spatial_mask(const Mask& motion, SpatialMaskMode mode) {
  const int rows = motion.rows();
  const int cols = motion.cols();
  const auto& m = motion.weights;
  auto at = [&](int x, int y) { return m(std::clamp(x, 0, cols - 1), std::clamp(y, 0, rows - 1)); };

  ScalarField magnitude(rows, cols, 0.0);
  double peak = 0.0;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const double g = std::sqrt(gx * gx + gy * gy);
      magnitude(x, y) = g;
      peak = std::max(peak, g);
    }
  }
  for (auto& v : magnitude.values()) {
    v = peak > 0.0 ? v / peak : 0.0;
    if (mode == SpatialMaskMode::kComplement) v = 1.0 - v;
  }
  return {std::move(magnitude), MaskKind::kSpatial};
}

}  // namespace gridflow
