#include "gridflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gridflow {

Trajectory chain(const std::vector<RigidTransform2D>& transforms, double cell_size_m) {
  if (!(cell_size_m > 0.0)) throw ParameterError("chain: cell size must be > 0");
  Trajectory traj;
  traj.poses.push_back(RigidTransform2D::identity());
  if (transforms.empty()) return traj;
  const FlowDirection dir = transforms.front().direction;
  for (const auto& t : transforms) {
    if (t.direction != dir) throw ParameterError("chain: transforms carry mixed direction tags");
    RigidTransform2D step = t.scaled(cell_size_m);
    if (dir == FlowDirection::kForward) step = step.inverse();
    step.direction = FlowDirection::kForward;
    traj.poses.push_back(compose(traj.poses.back(), step));
  }
  return traj;
}

std::vector<double> default_eval_lengths() { return {5, 10, 15, 20, 25, 30, 35, 40}; }
std::vector<double> kitti_eval_lengths() { return {100, 200, 300, 400, 500, 600, 700, 800}; }

double OdometryMetrics::are_deg_per_m_e3() const { return are * 180.0 / std::numbers::pi * 1e3; }

OdometryMetrics are_ate(const Trajectory& est, const Trajectory& ref, const std::vector<double>& lengths) {
  if (est.size() != ref.size()) throw ShapeError("are_ate: trajectories differ in length");
  if (ref.size() < 2) throw ParameterError("are_ate: need at least two poses");
  for (double l : lengths) {
    if (!(l > 0.0)) throw ParameterError("are_ate: evaluation lengths must be > 0");
  }

  std::vector<double> dist(ref.size(), 0.0);
  for (std::size_t i = 1; i < ref.size(); ++i) {
    dist[i] = dist[i - 1] + std::sqrt((ref.poses[i].t - ref.poses[i - 1].t).squared_norm());
  }

  OdometryMetrics out;
  double r_sum = 0.0, t_sum = 0.0;
  for (double len : lengths) {
    LengthMetrics lm;
    lm.length_m = len;
    double lr = 0.0, lt = 0.0;
    for (std::size_t first = 0; first < ref.size(); ++first) {
      const auto it = std::lower_bound(dist.begin() + static_cast<std::ptrdiff_t>(first), dist.end(), dist[first] + len);
      if (it == dist.end()) break;
      const auto last = static_cast<std::size_t>(it - dist.begin());
      const auto d_ref = compose(ref.poses[first].inverse(), ref.poses[last]);
      const auto d_est = compose(est.poses[first].inverse(), est.poses[last]);
      const auto err = compose(d_est.inverse(), d_ref);
      const double r_err = std::abs(wrap_angle(err.theta)) / len;
      const double t_err = std::sqrt(err.t.squared_norm()) / len;
      lr += r_err;
      lt += t_err;
      r_sum += r_err;
      t_sum += t_err;
      ++lm.samples;
    }
    if (lm.samples > 0) {
      lm.are = lr / lm.samples;
      lm.ate = lt / lm.samples;
    }
    out.samples += lm.samples;
    out.per_length.push_back(lm);
  }
  if (out.samples > 0) {
    out.empty = false;
    out.are = r_sum / out.samples;
    out.ate = t_sum / out.samples;
  }
  return out;
}

EpeStats endpoint_error(const FlowField& est, const FlowField& gt, const ValidSet& valid) {
  require_same_shape(est.displacement, gt.displacement, "endpoint_error");
  require_same_shape(est.displacement, valid, "endpoint_error valid set");
  std::vector<double> errors;
  for (int y = 0; y < est.rows(); ++y) {
    for (int x = 0; x < est.cols(); ++x) {
      if (valid(x, y)) errors.push_back(std::sqrt((est(x, y) - gt(x, y)).squared_norm()));
    }
  }
  EpeStats s;
  s.count = static_cast<int>(errors.size());
  if (errors.empty()) return s;
  double sum = 0.0;
  for (double e : errors) {
    sum += e;
    s.max = std::max(s.max, e);
  }
  s.mean = sum / static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  s.median = n % 2 == 1 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  return s;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
  const double ih = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
  const double inter = iw * ih;
  const double area_a = std::max(0.0, a.xmax - a.xmin) * std::max(0.0, a.ymax - a.ymin);
  const double area_b = std::max(0.0, b.xmax - b.xmin) * std::max(0.0, b.ymax - b.ymin);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

IouReport object_prediction_iou(const FlowField& flow, const std::vector<ObjectBox>& boxes1,
                                const std::vector<ObjectBox>& boxes2, const GridMap& map1) {
  if (flow.rows() != map1.rows() || flow.cols() != map1.cols()) throw ShapeError("object_prediction_iou: flow/map shapes differ");
  const auto& count = map1.layer(layer::kReflectionCount);
  IouReport report;
  double sum = 0.0;
  for (const auto& ob : boxes1) {
    const auto match = std::find_if(boxes2.begin(), boxes2.end(), [&](const ObjectBox& b) { return b.id == ob.id; });
    if (match == boxes2.end()) {
      ++report.skipped;
      continue;
    }
    // Cells whose footprint [i - 0.5, i + 0.5] overlaps the box.
    const int x0 = std::max(0, static_cast<int>(std::ceil(ob.box.xmin - 0.5)));
    const int x1 = std::min(flow.cols() - 1, static_cast<int>(std::floor(ob.box.xmax + 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(ob.box.ymin - 0.5)));
    const int y1 = std::min(flow.rows() - 1, static_cast<int>(std::floor(ob.box.ymax + 0.5)));
    Vec2 acc;
    int n = 0;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (count(x, y) > 0.0) {
          acc += flow(x, y);
          ++n;
        }
      }
    }
    if (n == 0) {
      ++report.skipped;
      continue;
    }
    ObjectIou o;
    o.id = ob.id;
    o.mean_flow = (1.0 / n) * acc;
    o.predicted = {ob.box.xmin + o.mean_flow.x, ob.box.ymin + o.mean_flow.y, ob.box.xmax + o.mean_flow.x,
                   ob.box.ymax + o.mean_flow.y};
    o.iou = iou(o.predicted, match->box);
    sum += o.iou;
    report.objects.push_back(o);
  }
  if (!report.objects.empty()) report.mean = sum / static_cast<double>(report.objects.size());
  return report;
}

}  // namespace gridflow
