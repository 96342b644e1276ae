#include "gridflow/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace gridflow {
namespace {

struct Level {
  GridMap features1, features2;
  ValidSet occupancy1, occupancy2;
};

// Root mean square of a layer over the occupied cells of both frames.
double occupied_rms(const ScalarField& a, const ValidSet& occ_a, const ScalarField& b, const ValidSet& occ_b) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    if (occ_a.values()[i]) sum += a.values()[i] * a.values()[i], ++n;
    if (occ_b.values()[i]) sum += b.values()[i] * b.values()[i], ++n;
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

struct AdamState {
  Field<Vec2> m, v;
  int t = 0;

  AdamState(int rows, int cols) : m(rows, cols), v(rows, cols) {}
};

// Adam direction (before scaling by the step size) for one flow field.
Field<Vec2> adam_direction(AdamState& s, const Field<Vec2>& g, const OptimizerConfig& cfg) {
  ++s.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, s.t);
  const double c2 = 1.0 - std::pow(cfg.beta2, s.t);
  Field<Vec2> dir(g.rows(), g.cols());
  auto gv = g.values();
  auto mv = s.m.values();
  auto vv = s.v.values();
  auto out = dir.values();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
    vv[i].x = cfg.beta2 * vv[i].x + (1.0 - cfg.beta2) * gv[i].x * gv[i].x;
    vv[i].y = cfg.beta2 * vv[i].y + (1.0 - cfg.beta2) * gv[i].y * gv[i].y;
    out[i].x = (mv[i].x / c1) / (std::sqrt(vv[i].x / c2) + cfg.adam_epsilon);
    out[i].y = (mv[i].y / c1) / (std::sqrt(vv[i].y / c2) + cfg.adam_epsilon);
  }
  return dir;
}

FlowField step_along(const FlowField& flow, const Field<Vec2>& dir, double alpha) {
  FlowField out = flow;
  auto o = out.displacement.values();
  auto d = dir.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] - alpha * d[i];
  return out;
}

bool any_set(const ValidSet& v) {
  return std::any_of(v.values().begin(), v.values().end(), [](std::uint8_t b) { return b != 0; });
}

struct DirectionState {
  RigidTransform2D transform;
  DirectionMasks masks;
};

// Rigid transform and motion/spatial masks for the current flow.
DirectionState motion_state(const FlowField& flow, const ValidSet& valid, const OptimizerConfig& cfg) {
  const int rows = flow.rows();
  const int cols = flow.cols();
  DirectionState st{RigidTransform2D::identity(flow.direction),
                    {Mask::uniform(rows, cols, MaskKind::kData), Mask::uniform(rows, cols, MaskKind::kMotion),
                     Mask::uniform(rows, cols, MaskKind::kSpatial)}};
  try {
    auto irls = irls_estimate(flow, valid, cfg.irls_iterations);
    st.transform = irls.transform;
    st.masks.motion = std::move(irls.mask);
  } catch (const EstimationError&) {
    // Degenerate support: keep identity motion and unit weights.
  }
  // The spatial mask is derived from the dense motion mask so that occupancy
  // borders do not register as motion boundaries.
  auto residual = motion_residual(flow, motion_flow(st.transform, rows, cols));
  const Mask dense = motion_mask(residual);
  st.masks.spatial = spatial_mask(dense, cfg.spatial_mask_mode);
  return st;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (pyramid_levels < 0) throw ParameterError("pyramid_levels must be >= 0 (0 = auto)");
  if (pyramid_levels == 0 && !(max_displacement_cells > 0.0)) throw ParameterError("max_displacement_cells must be > 0");
  if (steps_per_level < 1 || outer_alternations < 1 || irls_iterations < 1) {
    throw ParameterError("optimizer counts must be >= 1");
  }
  if (!(step_size > 0.0)) throw ParameterError("step_size must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("moment decays must lie in [0, 1)");
  if (!(tolerance > 0.0)) throw ParameterError("tolerance must be > 0");
  if (max_backtracks < 0) throw ParameterError("max_backtracks must be >= 0");
  if (sigma_schedule.empty()) throw ParameterError("sigma_schedule must not be empty");
  for (double s : sigma_schedule) {
    if (!(s >= 0.0)) throw ParameterError("sigma_schedule entries must be >= 0");
  }
  if (feature_layers.empty()) throw ParameterError("feature_layers must not be empty");
  weights.validate();
}

int OptimizerConfig::levels() const { return pyramid_levels > 0 ? pyramid_levels : auto_levels(max_displacement_cells); }

double OptimizerConfig::sigma_for(int level_from_coarsest) const {
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(level_from_coarsest), sigma_schedule.size() - 1);
  return sigma_schedule[i];
}

int auto_levels(double max_displacement_cells) {
  if (!(max_displacement_cells > 0.0)) throw ParameterError("auto_levels: displacement bound must be > 0");
  int levels = 1;
  double d = max_displacement_cells;
  while (d > 2.0) {
    d *= 0.5;
    ++levels;
  }
  return levels;
}

ScalarField downsample(const ScalarField& f) {
  const int rows = (f.rows() + 1) / 2;
  const int cols = (f.cols() + 1) / 2;
  ScalarField out(rows, cols, 0.0);
  for (int y = 0; y < rows; ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, f.rows() - 1);
    for (int x = 0; x < cols; ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, f.cols() - 1);
      out(x, y) = 0.25 * ((f(x0, y0) + f(x1, y0)) + (f(x0, y1) + f(x1, y1)));
    }
  }
  return out;
}

GridMap downsample(const GridMap& map) {
  GridMap out((map.rows() + 1) / 2, (map.cols() + 1) / 2, 2.0 * map.cell_size());
  out.set_frame_id(map.frame_id());
  for (const auto& l : map.layers()) out.add_layer(l.name, downsample(l.values));
  return out;
}

FlowField downsample(const FlowField& flow) {
  ScalarField u(flow.rows(), flow.cols()), v(flow.rows(), flow.cols());
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      u(x, y) = flow(x, y).x;
      v(x, y) = flow(x, y).y;
    }
  }
  const auto du = downsample(u);
  const auto dv = downsample(v);
  FlowField out(du.rows(), du.cols(), flow.direction);
  for (int y = 0; y < out.rows(); ++y) {
    for (int x = 0; x < out.cols(); ++x) out(x, y) = {0.5 * du(x, y), 0.5 * dv(x, y)};
  }
  return out;
}

ValidSet downsample(const ValidSet& s) {
  ValidSet out((s.rows() + 1) / 2, (s.cols() + 1) / 2, 0);
  for (int y = 0; y < s.rows(); ++y) {
    for (int x = 0; x < s.cols(); ++x) {
      if (s(x, y)) out(x / 2, y / 2) = 1;
    }
  }
  return out;
}

FlowField upsample(const FlowField& flow, int rows, int cols) {
  ScalarField u(flow.rows(), flow.cols()), v(flow.rows(), flow.cols());
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      u(x, y) = flow(x, y).x;
      v(x, y) = flow(x, y).y;
    }
  }
  FlowField out(rows, cols, flow.direction);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const Vec2 c{std::clamp((x + 0.5) * 0.5 - 0.5, 0.0, flow.cols() - 1.0),
                   std::clamp((y + 0.5) * 0.5 - 0.5, 0.0, flow.rows() - 1.0)};
      out(x, y) = {2.0 * bilinear_sample(u, c).value, 2.0 * bilinear_sample(v, c).value};
    }
  }
  return out;
}

GridMap feature_map(const GridMap& raw, const std::vector<std::string>& layers, double gain) {
  GridMap out(raw.rows(), raw.cols(), raw.cell_size());
  out.set_frame_id(raw.frame_id());
  for (const auto& name : layers) {
    ScalarField f = raw.layer(name);
    if (name == layer::kReflectionCount) {
      for (auto& v : f.values()) v = std::log1p(v);
    }
    for (auto& v : f.values()) v *= gain;
    out.add_layer(name, std::move(f));
  }
  return out;
}

FlowResult estimate_flow_pair(const GridMap& map1, const GridMap& map2, const OptimizerConfig& cfg) {
  cfg.validate();
  if (map1.rows() != map2.rows() || map1.cols() != map2.cols()) throw ShapeError("estimate_flow_pair: map shapes differ");

  const int n_levels = cfg.levels();
  // pyramid[0] is the finest level.
  std::vector<Level> pyramid;
  pyramid.push_back({feature_map(map1, cfg.feature_layers, cfg.feature_gain), feature_map(map2, cfg.feature_layers, cfg.feature_gain), occupancy(map1),
                     occupancy(map2)});
  if (!any_set(pyramid[0].occupancy1) || !any_set(pyramid[0].occupancy2)) {
    throw EstimationError("estimate_flow_pair: a frame has no occupied cells");
  }
  for (int l = 1; l < n_levels; ++l) {
    const Level& prev = pyramid.back();
    if (prev.features1.rows() < 6 || prev.features1.cols() < 6) break;
    pyramid.push_back({downsample(prev.features1), downsample(prev.features2), downsample(prev.occupancy1),
                       downsample(prev.occupancy2)});
  }

  FlowResult result;
  const int coarsest = static_cast<int>(pyramid.size()) - 1;
  for (int li = coarsest; li >= 0; --li) {
    const int level_from_coarsest = coarsest - li;
    const Level& level = pyramid[static_cast<std::size_t>(li)];
    const double sigma = cfg.sigma_for(level_from_coarsest);
    GridMap f1 = gaussian_blur(level.features1, sigma);
    GridMap f2 = gaussian_blur(level.features2, sigma);
    if (cfg.normalize_levels) {
      const Level& finest = pyramid.front();
      for (std::size_t l = 0; l < f1.layer_count(); ++l) {
        const double ref = occupied_rms(finest.features1.layers()[l].values, finest.occupancy1,
                                        finest.features2.layers()[l].values, finest.occupancy2);
        const double cur = occupied_rms(f1.layers()[l].values, level.occupancy1, f2.layers()[l].values, level.occupancy2);
        if (!(ref > 0.0) || !(cur > 0.0)) continue;
        for (auto& v : f1.layers()[l].values.values()) v *= ref / cur;
        for (auto& v : f2.layers()[l].values.values()) v *= ref / cur;
      }
    }
    const int rows = f1.rows();
    const int cols = f1.cols();

    if (li == coarsest) {
      result.flow_fw = FlowField(rows, cols, FlowDirection::kForward);
      result.flow_bw = FlowField(rows, cols, FlowDirection::kBackward);
    } else {
      result.flow_fw = upsample(result.flow_fw, rows, cols);
      result.flow_bw = upsample(result.flow_bw, rows, cols);
    }

    result.converged = false;
    for (int alt = 0; alt < cfg.outer_alternations; ++alt) {
      AdamState adam_fw(rows, cols), adam_bw(rows, cols);
      auto [valid_fw, valid_bw] = valid_sets(level.occupancy1, level.occupancy2, result.flow_fw, result.flow_bw);
      if (!any_set(valid_fw) || !any_set(valid_bw)) throw EstimationError("estimate_flow_pair: no valid cells");

      auto fw = motion_state(result.flow_fw, valid_fw, cfg);
      auto bw = motion_state(result.flow_bw, valid_bw, cfg);
      if (cfg.use_occlusion_mask && (li == 0 || !cfg.occlusion_finest_only)) {
        fw.masks.data = occlusion_mask(result.flow_fw, result.flow_bw, cfg.occlusion);
        bw.masks.data = occlusion_mask(result.flow_bw, result.flow_fw, cfg.occlusion);
      }
      result.transform_fw = fw.transform;
      result.transform_bw = bw.transform;

      auto problem_for = [&](const FlowField& ffw, const FlowField& fbw) {
        return LossProblem{f1,       f2,       ffw,      fbw,      fw.masks,    bw.masks,
                           fw.transform, bw.transform, valid_fw, valid_bw, cfg.weights, cfg.loss_options};
      };

      LossEvaluation current = evaluate_loss(problem_for(result.flow_fw, result.flow_bw), true);
      result.trace.push_back({level_from_coarsest, alt, current.breakdown.total});
      bool stalled = false;
      for (int step = 0; step < cfg.steps_per_level && !stalled; ++step) {
        const auto dir_fw = adam_direction(adam_fw, current.gradient.forward, cfg);
        const auto dir_bw = adam_direction(adam_bw, current.gradient.backward, cfg);
        double alpha = cfg.step_size;
        bool accepted = false;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt, alpha *= 0.5) {
          FlowField trial_fw = step_along(result.flow_fw, dir_fw, alpha);
          FlowField trial_bw = step_along(result.flow_bw, dir_bw, alpha);
          LossEvaluation trial = evaluate_loss(problem_for(trial_fw, trial_bw), true);
          if (trial.breakdown.total <= current.breakdown.total) {
            const double before = current.breakdown.total;
            result.flow_fw = std::move(trial_fw);
            result.flow_bw = std::move(trial_bw);
            current = std::move(trial);
            result.trace.push_back({level_from_coarsest, alt, current.breakdown.total});
            accepted = true;
            if (before - current.breakdown.total < cfg.tolerance * std::max(std::abs(before), 1e-300)) stalled = true;
            break;
          }
        }
        if (!accepted) stalled = true;
      }
      result.converged = stalled;
      result.loss_history.push_back(current.breakdown.total);
      result.masks_fw = std::move(fw.masks);
      result.masks_bw = std::move(bw.masks);
      result.final_breakdown = current.breakdown;
    }
  }

  // Transform and masks consistent with the returned flows.
  auto [valid_fw, valid_bw] = valid_sets(pyramid[0].occupancy1, pyramid[0].occupancy2, result.flow_fw, result.flow_bw);
  if (any_set(valid_fw)) {
    auto fw = motion_state(result.flow_fw, valid_fw, cfg);
    result.transform_fw = fw.transform;
    result.masks_fw.motion = std::move(fw.masks.motion);
    result.masks_fw.spatial = std::move(fw.masks.spatial);
  }
  if (any_set(valid_bw)) {
    auto bw = motion_state(result.flow_bw, valid_bw, cfg);
    result.transform_bw = bw.transform;
    result.masks_bw.motion = std::move(bw.masks.motion);
    result.masks_bw.spatial = std::move(bw.masks.spatial);
  }
  if (cfg.use_occlusion_mask) {
    result.masks_fw.data = occlusion_mask(result.flow_fw, result.flow_bw, cfg.occlusion);
    result.masks_bw.data = occlusion_mask(result.flow_bw, result.flow_fw, cfg.occlusion);
  }
  return result;
}

}  // namespace gridflow
