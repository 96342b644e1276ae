#include "gridflow/losses.hpp"

#include <cmath>
#include <string>

#include "gridflow/rigid_motion.hpp"

namespace gridflow {
namespace {

void check_mask(const Mask& mask, const char* what) {
  for (double m : mask.weights.values()) {
    if (!(m >= 0.0 && m <= 1.0)) throw DomainError(std::string(what) + ": mask value outside [0, 1]");
  }
}

void check_layers(const GridMap& a, const GridMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("data_loss: map dimensions differ");
  if (a.layer_count() != b.layer_count()) throw ShapeError("data_loss: maps carry different layer counts");
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    if (a.layers()[l].name != b.layers()[l].name) throw ShapeError("data_loss: layer names differ");
  }
  for (const GridMap* map : {&a, &b}) {
    for (const auto& layer : map->layers()) {
      for (double v : layer.values.values()) {
        if (!std::isfinite(v)) throw ValidationError("data_loss: layer '" + layer.name + "' has non-finite values");
      }
    }
  }
}

bool interior(int x, int y, int rows, int cols) { return x >= 1 && y >= 1 && x <= cols - 2 && y <= rows - 2; }

// Stencil coefficients for offsets -1, 0, +1.
std::array<double, 3> stencil_coefficients(StencilMode mode) {
  if (mode == StencilMode::kSecondDifference) return {1.0, -2.0, 1.0};
  return {-0.5, 0.0, 0.5};
}

struct DirectionInputs {
  const GridMap& source;
  const GridMap& target;
  const FlowField& flow;
  const DirectionMasks& masks;
  const RigidTransform2D& transform;
  const ValidSet& valid;
};

// Picks, per component, the one-sided slope that admits descent. Zero when
// neither side does (a kink at a local minimum).
double resolve_slope(double lower, double upper) {
  const bool down = lower > 0.0;
  const bool up = upper < 0.0;
  if (down && up) return lower >= -upper ? lower : upper;
  if (down) return lower;
  if (up) return upper;
  return 0.0;
}

DirectionBreakdown evaluate_direction(const DirectionInputs& in, const LossWeights& w, const LossOptions& opt,
                                      Field<Vec2>* grad_out) {
  const int rows = in.flow.rows();
  const int cols = in.flow.cols();
  DirectionBreakdown out;
  // Smooth terms accumulate into `grad`; the data term keeps its one-sided
  // parts separate until the end.
  Field<Vec2> grad_storage, data_lower, data_upper;
  Field<Vec2>* grad = nullptr;
  if (grad_out) {
    grad_storage = Field<Vec2>(rows, cols);
    data_lower = Field<Vec2>(rows, cols);
    data_upper = Field<Vec2>(rows, cols);
    grad = &grad_storage;
  }

  // Data term.
  const std::size_t n_layers = in.source.layer_count();
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      if (!in.valid(x, y)) continue;
      ++out.valid_cells;
      const double m = in.masks.data.weights(x, y);
      const Vec2 q{x + in.flow(x, y).x, y + in.flow(x, y).y};
      double r2 = 0.0;
      Vec2 dr2_lower, dr2_upper;  // one-sided d(|r|^2)/dd
      for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& tgt = in.target.layers()[l].values;
        const double r = in.source.layers()[l].values(x, y) - clamped_sample(tgt, q);
        r2 += r * r;
        if (grad) {
          const auto g = clamped_sample_one_sided(tgt, q);
          dr2_lower += (-2.0 * r) * g.lower;
          dr2_upper += (-2.0 * r) * g.upper;
        }
      }
      out.data.robust += m * charbonnier(r2);
      out.data.regularizer += mask_regularizer(m);
      ++out.data.cells;
      if (grad && w.data != 0.0) {
        const double c = w.data * m * charbonnier_derivative(r2);
        data_lower(x, y) = c * dr2_lower;
        data_upper(x, y) = c * dr2_upper;
      }
    }
  }

  // Motion term.
  const FlowField model = motion_flow(in.transform, rows, cols);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      if (!in.valid(x, y)) continue;
      const Vec2 r = model(x, y) - in.flow(x, y);
      const double s = r.squared_norm();
      const Vec2 ds{-2.0 * r.x, -2.0 * r.y};  // d(|r|^2)/dd
      double m = in.masks.motion.weights(x, y);
      if (opt.differentiable_motion_mask) m = motion_mask_value(s);
      out.motion.robust += m * charbonnier(s);
      out.motion.regularizer += mask_regularizer(m);
      ++out.motion.cells;
      if (grad && w.motion != 0.0) {
        double coeff = m * charbonnier_derivative(s);
        if (opt.differentiable_motion_mask) {
          const double dm = motion_mask_derivative(s);
          coeff += dm * (charbonnier(s) + w.reg * mask_regularizer_derivative(m));
        }
        (*grad)(x, y) += (w.motion * coeff) * ds;
      }
    }
  }

  // Spatial term.
  const auto responses = spatial_residual(in.flow, opt.stencil);
  const auto k = stencil_coefficients(opt.stencil);
  for (int y = 1; y + 1 < rows; ++y) {
    for (int x = 1; x + 1 < cols; ++x) {
      if (!in.valid(x, y)) continue;
      const auto& s = responses(x, y);
      const double s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3];
      const double m = in.masks.spatial.weights(x, y);
      out.spatial.robust += m * charbonnier(s2);
      out.spatial.regularizer += mask_regularizer(m);
      ++out.spatial.cells;
      if (grad && w.spatial != 0.0) {
        const double c = 2.0 * w.spatial * m * charbonnier_derivative(s2);
        for (int o = -1; o <= 1; ++o) {
          const double kk = c * k[static_cast<std::size_t>(o + 1)];
          if (kk == 0.0) continue;
          (*grad)(x + o, y) += Vec2{kk * s[0], kk * s[2]};
          (*grad)(x, y + o) += Vec2{kk * s[1], kk * s[3]};
        }
      }
    }
  }

  if (grad_out) {
    auto g = grad->values();
    auto lo = data_lower.values();
    auto hi = data_upper.values();
    auto dst = grad_out->values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      dst[i] += Vec2{resolve_slope(lo[i].x + g[i].x, hi[i].x + g[i].x), resolve_slope(lo[i].y + g[i].y, hi[i].y + g[i].y)};
    }
  }
  return out;
}

void check_problem(const LossProblem& p) {
  const auto& f = p.flow_fw;
  const auto& b = p.flow_bw;
  if (f.direction != FlowDirection::kForward || b.direction != FlowDirection::kBackward) {
    throw ParameterError("total_loss: expects a 2<-1 flow and a 1<-2 flow");
  }
  require_same_shape(f.displacement, b.displacement, "total_loss");
  for (const auto* v : {&p.valid_fw, &p.valid_bw}) require_same_shape(f.displacement, *v, "total_loss valid set");
  for (const auto* m : {&p.masks_fw, &p.masks_bw}) {
    require_same_shape(f.displacement, m->data.weights, "total_loss data mask");
    require_same_shape(f.displacement, m->motion.weights, "total_loss motion mask");
    require_same_shape(f.displacement, m->spatial.weights, "total_loss spatial mask");
    check_mask(m->data, "total_loss");
    check_mask(m->motion, "total_loss");
    check_mask(m->spatial, "total_loss");
  }
  if (p.map1.rows() != f.rows() || p.map1.cols() != f.cols()) throw ShapeError("total_loss: map/flow dimensions differ");
  check_layers(p.map1, p.map2);
  if (f.rows() < 3 || f.cols() < 3) throw ShapeError("total_loss: field must be at least 3x3");
  p.weights.validate();
}

}  // namespace

double charbonnier(double x) {
  if (!(x >= 0.0)) throw DomainError("charbonnier: argument must be >= 0");
  return std::pow(x + kCharbonnierEpsilon, kCharbonnierExponent);
}

double charbonnier_derivative(double x) {
  if (!(x >= 0.0)) throw DomainError("charbonnier: argument must be >= 0");
  return kCharbonnierExponent * std::pow(x + kCharbonnierEpsilon, kCharbonnierExponent - 1.0);
}

double mask_regularizer(double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw DomainError("mask_regularizer: mask value outside [0, 1]");
  return charbonnier((1.0 - m) * (1.0 - m));
}

double mask_regularizer_derivative(double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw DomainError("mask_regularizer: mask value outside [0, 1]");
  return charbonnier_derivative((1.0 - m) * (1.0 - m)) * (-2.0 * (1.0 - m));
}

void LossWeights::validate() const {
  for (double v : {data, motion, spatial, reg}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("loss weights must be finite and >= 0");
  }
}

Mask occlusion_mask(const FlowField& flow, const FlowField& reverse_flow, const OcclusionParams& params) {
  if (flow.direction == reverse_flow.direction) throw ParameterError("occlusion_mask: flows must have opposite directions");
  require_same_shape(flow.displacement, reverse_flow.displacement, "occlusion_mask");
  const int rows = flow.rows();
  const int cols = flow.cols();
  Mask mask = Mask::uniform(rows, cols, MaskKind::kData, 0.0);

  ScalarField ru(rows, cols), rv(rows, cols);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      ru(x, y) = reverse_flow(x, y).x;
      rv(x, y) = reverse_flow(x, y).y;
    }
  }
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const Vec2 d = flow(x, y);
      const Vec2 q{x + d.x, y + d.y};
      if (!coordinate_in_bounds(rows, cols, q)) continue;
      const Vec2 back{bilinear_sample(ru, q).value, bilinear_sample(rv, q).value};
      const double lhs = (d + back).squared_norm();
      const double rhs = params.alpha1 * (d.squared_norm() + back.squared_norm()) + params.alpha2;
      mask.weights(x, y) = lhs > rhs ? 0.0 : 1.0;
    }
  }
  return mask;
}

DataLoss data_loss(const GridMap& source, const GridMap& target, const FlowField& flow, const Mask& mask,
                   const ValidSet& valid) {
  check_layers(source, target);
  if (source.rows() != flow.rows() || source.cols() != flow.cols()) throw ShapeError("data_loss: map/flow dimensions differ");
  require_same_shape(flow.displacement, mask.weights, "data_loss mask");
  require_same_shape(flow.displacement, valid, "data_loss valid set");
  check_mask(mask, "data_loss");

  DataLoss out;
  out.residuals.assign(source.layer_count(), ScalarField(flow.rows(), flow.cols(), 0.0));
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      if (!valid(x, y)) continue;
      const Vec2 q{x + flow(x, y).x, y + flow(x, y).y};
      double r2 = 0.0;
      for (std::size_t l = 0; l < source.layer_count(); ++l) {
        const double r = source.layers()[l].values(x, y) - clamped_sample(target.layers()[l].values, q);
        out.residuals[l](x, y) = r;
        r2 += r * r;
      }
      const double m = mask.weights(x, y);
      out.term.robust += m * charbonnier(r2);
      out.term.regularizer += mask_regularizer(m);
      ++out.term.cells;
    }
  }
  return out;
}

Field<Vec2> motion_residual(const FlowField& flow, const FlowField& motion_flow) {
  if (flow.direction != motion_flow.direction) throw ParameterError("motion_residual: flow directions differ");
  require_same_shape(flow.displacement, motion_flow.displacement, "motion_residual");
  Field<Vec2> r(flow.rows(), flow.cols());
  auto out = r.values();
  auto a = motion_flow.displacement.values();
  auto b = flow.displacement.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return r;
}

TermValue motion_loss(const Field<Vec2>& residuals, const Mask& mask, const ValidSet& valid) {
  require_same_shape(residuals, mask.weights, "motion_loss mask");
  require_same_shape(residuals, valid, "motion_loss valid set");
  check_mask(mask, "motion_loss");
  TermValue t;
  for (int y = 0; y < residuals.rows(); ++y) {
    for (int x = 0; x < residuals.cols(); ++x) {
      if (!valid(x, y)) continue;
      const double m = mask.weights(x, y);
      t.robust += m * charbonnier(residuals(x, y).squared_norm());
      t.regularizer += mask_regularizer(m);
      ++t.cells;
    }
  }
  return t;
}

SpatialResponse spatial_residual(const FlowField& flow, StencilMode mode) {
  const int rows = flow.rows();
  const int cols = flow.cols();
  if (rows < 3 || cols < 3) throw ShapeError("spatial_residual: field must be at least 3x3");
  const auto k = stencil_coefficients(mode);
  SpatialResponse s(rows, cols, {0.0, 0.0, 0.0, 0.0});
  for (int y = 1; y + 1 < rows; ++y) {
    for (int x = 1; x + 1 < cols; ++x) {
      const Vec2 l = flow(x - 1, y), c = flow(x, y), r = flow(x + 1, y);
      const Vec2 u = flow(x, y - 1), d = flow(x, y + 1);
      s(x, y) = {k[0] * l.x + k[1] * c.x + k[2] * r.x, k[0] * u.x + k[1] * c.x + k[2] * d.x,
                 k[0] * l.y + k[1] * c.y + k[2] * r.y, k[0] * u.y + k[1] * c.y + k[2] * d.y};
    }
  }
  return s;
}

TermValue spatial_loss(const SpatialResponse& responses, const Mask& mask, const ValidSet& valid) {
  require_same_shape(responses, mask.weights, "spatial_loss mask");
  require_same_shape(responses, valid, "spatial_loss valid set");
  check_mask(mask, "spatial_loss");
  TermValue t;
  for (int y = 0; y < responses.rows(); ++y) {
    for (int x = 0; x < responses.cols(); ++x) {
      if (!valid(x, y) || !interior(x, y, responses.rows(), responses.cols())) continue;
      const auto& s = responses(x, y);
      const double m = mask.weights(x, y);
      t.robust += m * charbonnier(s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3]);
      t.regularizer += mask_regularizer(m);
      ++t.cells;
    }
  }
  return t;
}

double DirectionBreakdown::weighted(const LossWeights& w) const {
  return w.data * data.value(w.reg) + w.motion * motion.value(w.reg) + w.spatial * spatial.value(w.reg);
}

std::array<ValidSet, 2> valid_sets(const ValidSet& occupancy1, const ValidSet& occupancy2, const FlowField& flow_fw,
                                   const FlowField& flow_bw) {
  return {valid_set(occupancy1, flow_fw), valid_set(occupancy2, flow_bw)};
}

LossEvaluation evaluate_loss(const LossProblem& p, bool with_gradient) {
  check_problem(p);
  LossEvaluation ev;
  if (with_gradient) {
    ev.gradient.forward = Field<Vec2>(p.flow_fw.rows(), p.flow_fw.cols());
    ev.gradient.backward = Field<Vec2>(p.flow_bw.rows(), p.flow_bw.cols());
  }
  ev.breakdown.forward =
      evaluate_direction({p.map1, p.map2, p.flow_fw, p.masks_fw, p.transform_fw, p.valid_fw}, p.weights, p.options,
                         with_gradient ? &ev.gradient.forward : nullptr);
  ev.breakdown.backward =
      evaluate_direction({p.map2, p.map1, p.flow_bw, p.masks_bw, p.transform_bw, p.valid_bw}, p.weights, p.options,
                         with_gradient ? &ev.gradient.backward : nullptr);
  ev.breakdown.weights = p.weights;
  ev.breakdown.total = ev.breakdown.forward.weighted(p.weights) + ev.breakdown.backward.weighted(p.weights);
  if (!std::isfinite(ev.breakdown.total)) {
    const auto& f = ev.breakdown.forward;
    const auto& b = ev.breakdown.backward;
    const char* term = !std::isfinite(f.data.robust + b.data.robust)       ? "data"
                       : !std::isfinite(f.motion.robust + b.motion.robust) ? "motion"
                                                                           : "spatial";
    throw NumericalError(std::string("total_loss: non-finite ") + term + " term");
  }
  return ev;
}

LossBreakdown total_loss(const LossProblem& problem) { return evaluate_loss(problem, false).breakdown; }

LossGradient loss_gradient(const LossProblem& problem) { return evaluate_loss(problem, true).gradient; }

}  // namespace gridflow
