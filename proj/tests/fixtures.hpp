#pragma once

#include <random>
#include <string>
#include <vector>

#include "gridflow/losses.hpp"
#include "gridflow/pipeline.hpp"
#include "gridflow/rigid_motion.hpp"
#include "oracle.hpp"

namespace fixtures {

using namespace gridflow;

inline GridMap random_map(int rows, int cols, const std::vector<std::string>& layers, std::mt19937_64& rng) {
  GridMap m(rows, cols, 0.15);
  for (const auto& name : layers) m.add_layer(name, oracle::random_field(rows, cols, rng));
  return m;
}

inline Mask random_mask(int rows, int cols, MaskKind kind, std::mt19937_64& rng) {
  return {oracle::random_field(rows, cols, rng, 0.05, 0.95), kind};
}

inline ValidSet random_occupancy(int rows, int cols, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  ValidSet v(rows, cols, 0);
  for (auto& c : v.values()) c = b(rng) ? 1 : 0;
  return v;
}

/// Owns every input of a LossProblem so the references stay alive.
struct LossInstance {
  GridMap map1, map2;
  FlowField flow_fw, flow_bw;
  DirectionMasks masks_fw, masks_bw;
  RigidTransform2D transform_fw, transform_bw;
  ValidSet valid_fw, valid_bw;
  LossWeights weights;
  LossOptions options;

  LossProblem problem() const { return problem_with(flow_fw, flow_bw); }
  LossProblem problem_with(const FlowField& fw, const FlowField& bw) const {
    return {map1, map2, fw, bw, masks_fw, masks_bw, transform_fw, transform_bw, valid_fw, valid_bw, weights, options};
  }
};

/// Random two-layer instance with off-grid sample positions and random masks,
/// transforms and weights.
inline LossInstance random_instance(std::uint64_t seed, int n = 16) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-0.1, 0.1), shift(-2.0, 2.0), weight(0.5, 2.0);
  LossInstance in;
  in.map1 = random_map(n, n, {"a", "b"}, rng);
  in.map2 = random_map(n, n, {"a", "b"}, rng);
  in.flow_fw = oracle::off_grid_flow(n, n, FlowDirection::kForward, rng);
  in.flow_bw = oracle::off_grid_flow(n, n, FlowDirection::kBackward, rng);
  for (auto* m : {&in.masks_fw, &in.masks_bw}) {
    m->data = random_mask(n, n, MaskKind::kData, rng);
    m->motion = random_mask(n, n, MaskKind::kMotion, rng);
    m->spatial = random_mask(n, n, MaskKind::kSpatial, rng);
  }
  in.transform_fw = {angle(rng), {shift(rng), shift(rng)}, FlowDirection::kForward};
  in.transform_bw = {angle(rng), {shift(rng), shift(rng)}, FlowDirection::kBackward};
  in.valid_fw = valid_set(random_occupancy(n, n, 0.7, rng), in.flow_fw);
  in.valid_bw = valid_set(random_occupancy(n, n, 0.7, rng), in.flow_bw);
  in.weights = {weight(rng), weight(rng), weight(rng), weight(rng)};
  return in;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  int components = 0;
};

/// Central differences of total_loss against loss_gradient over every flow
/// component of both directions. Relative error uses max(|a|, |b|, floor).
inline GradientCheck check_gradient(const LossInstance& in, double h = 1e-5, double floor = 1e-3) {
  const LossGradient g = loss_gradient(in.problem());
  GradientCheck out;
  FlowField fw = in.flow_fw;
  FlowField bw = in.flow_bw;
  for (int dir = 0; dir < 2; ++dir) {
    FlowField& f = dir == 0 ? fw : bw;
    const Field<Vec2>& analytic = dir == 0 ? g.forward : g.backward;
    for (int y = 0; y < f.rows(); ++y) {
      for (int x = 0; x < f.cols(); ++x) {
        for (int c = 0; c < 2; ++c) {
          double& v = c == 0 ? f(x, y).x : f(x, y).y;
          const double saved = v;
          v = saved + h;
          const double up = total_loss(in.problem_with(fw, bw)).total;
          v = saved - h;
          const double down = total_loss(in.problem_with(fw, bw)).total;
          v = saved;
          const double fd = (up - down) / (2.0 * h);
          const double a = c == 0 ? analytic(x, y).x : analytic(x, y).y;
          out.max_relative_error = std::max(out.max_relative_error, oracle::relative_error(a, fd, floor));
          ++out.components;
        }
      }
    }
  }
  return out;
}

struct ShiftedPair {
  GridMap map1, map2;
  FlowField gt;
};

/// A static, noise-free suite map and a copy moved by `shift` whole cells
/// along x (vacated cells hold zeros). The true forward flow is constant.
inline ShiftedPair shifted_pair(std::uint64_t seed, int shift) {
  SynthConfig sc = suite_synth_config();
  sc.objects = 0;
  sc.ego_forward_m = {0.0, 0.0};
  sc.ego_lateral_m = {0.0, 0.0};
  sc.ego_yaw_deg = {0.0, 0.0};
  const Scenario s = generate_scenario(seed, sc);
  ShiftedPair p;
  p.map1 = build_grid_map(render_frame(s, 0, 0.0), sc.grid);
  p.map2 = GridMap(p.map1.rows(), p.map1.cols(), p.map1.cell_size());
  for (const auto& l : p.map1.layers()) {
    auto& d = p.map2.add_layer(l.name);
    for (int y = 0; y < p.map1.rows(); ++y) {
      for (int x = 0; x < p.map1.cols(); ++x) {
        if (x - shift >= 0 && x - shift < p.map1.cols()) d(x, y) = l.values(x - shift, y);
      }
    }
  }
  p.gt = FlowField(p.map1.rows(), p.map1.cols(), FlowDirection::kForward, {double(shift), 0.0});
  return p;
}

}  // namespace fixtures
