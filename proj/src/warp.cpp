#include "gridflow/warp.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace gridflow {
namespace {

struct Stencil {
  int x0, y0, x1, y1;
  double fx, fy;
};

// Caller guarantees the coordinate is in bounds.
Stencil locate(int rows, int cols, Vec2 c) {
  Stencil s{};
  s.x0 = cols > 1 ? std::min(static_cast<int>(std::floor(c.x)), cols - 2) : 0;
  s.y0 = rows > 1 ? std::min(static_cast<int>(std::floor(c.y)), rows - 2) : 0;
  s.x1 = cols > 1 ? s.x0 + 1 : s.x0;
  s.y1 = rows > 1 ? s.y0 + 1 : s.y0;
  s.fx = cols > 1 ? c.x - s.x0 : 0.0;
  s.fy = rows > 1 ? c.y - s.y0 : 0.0;
  return s;
}

}  // namespace

FlowDirection opposite(FlowDirection d) {
  return d == FlowDirection::kForward ? FlowDirection::kBackward : FlowDirection::kForward;
}

const char* to_string(FlowDirection d) { return d == FlowDirection::kForward ? "2<-1" : "1<-2"; }

bool coordinate_in_bounds(int rows, int cols, Vec2 c) {
  return c.x >= 0.0 && c.y >= 0.0 && c.x <= cols - 1.0 && c.y <= rows - 1.0;
}

Sample bilinear_sample(const ScalarField& layer, Vec2 coord) {
  if (layer.empty()) throw ShapeError("bilinear_sample on an empty layer");
  if (!coordinate_in_bounds(layer.rows(), layer.cols(), coord)) return {0.0, false};
  const auto s = locate(layer.rows(), layer.cols(), coord);
  const double top = (1.0 - s.fx) * layer(s.x0, s.y0) + s.fx * layer(s.x1, s.y0);
  const double bottom = (1.0 - s.fx) * layer(s.x0, s.y1) + s.fx * layer(s.x1, s.y1);
  return {(1.0 - s.fy) * top + s.fy * bottom, true};
}

Vec2 sample_gradient(const ScalarField& layer, Vec2 coord) {
  if (layer.empty()) throw ShapeError("sample_gradient on an empty layer");
  if (!coordinate_in_bounds(layer.rows(), layer.cols(), coord)) return {};
  const auto s = locate(layer.rows(), layer.cols(), coord);
  const double v00 = layer(s.x0, s.y0);
  const double v10 = layer(s.x1, s.y0);
  const double v01 = layer(s.x0, s.y1);
  const double v11 = layer(s.x1, s.y1);
  Vec2 g;
  if (layer.cols() > 1) g.x = (1.0 - s.fy) * (v10 - v00) + s.fy * (v11 - v01);
  if (layer.rows() > 1) g.y = (1.0 - s.fx) * (v01 - v00) + s.fx * (v11 - v10);
  return g;
}

namespace {
Vec2 clamp_coord(int rows, int cols, Vec2 c) {
  return {std::clamp(c.x, 0.0, cols - 1.0), std::clamp(c.y, 0.0, rows - 1.0)};
}
}  // namespace

double clamped_sample(const ScalarField& layer, Vec2 coord) {
  return bilinear_sample(layer, clamp_coord(layer.rows(), layer.cols(), coord)).value;
}

Vec2 clamped_sample_gradient(const ScalarField& layer, Vec2 coord) {
  const Vec2 c = clamp_coord(layer.rows(), layer.cols(), coord);
  Vec2 g = sample_gradient(layer, c);
  if (c.x != coord.x) g.x = 0.0;
  if (c.y != coord.y) g.y = 0.0;
  return g;
}

namespace {
// Slope along x between columns xi and xi+1, interpolated at row coordinate y.
double slope_x(const ScalarField& f, int xi, double y) {
  const int y0 = f.rows() > 1 ? std::min(static_cast<int>(std::floor(y)), f.rows() - 2) : 0;
  const int y1 = f.rows() > 1 ? y0 + 1 : y0;
  const double fy = f.rows() > 1 ? y - y0 : 0.0;
  return (1.0 - fy) * (f(xi + 1, y0) - f(xi, y0)) + fy * (f(xi + 1, y1) - f(xi, y1));
}

double slope_y(const ScalarField& f, int yi, double x) {
  const int x0 = f.cols() > 1 ? std::min(static_cast<int>(std::floor(x)), f.cols() - 2) : 0;
  const int x1 = f.cols() > 1 ? x0 + 1 : x0;
  const double fx = f.cols() > 1 ? x - x0 : 0.0;
  return (1.0 - fx) * (f(x0, yi + 1) - f(x0, yi)) + fx * (f(x1, yi + 1) - f(x1, yi));
}

// Cells [i, i+1] used by the lower and upper one-sided slope at coordinate c
// on an axis with n samples; -1 means the slope is zero (clamped region).
std::pair<int, int> slope_cells(double c, int n) {
  if (n < 2 || c < 0.0 || c > n - 1.0) return {-1, -1};
  const double fl = std::floor(c);
  const int base = static_cast<int>(fl);
  if (fl == c) return {base >= 1 ? base - 1 : -1, base <= n - 2 ? base : -1};
  return {base, base};
}
}  // namespace

OneSidedGradient clamped_sample_one_sided(const ScalarField& layer, Vec2 coord) {
  if (layer.empty()) throw ShapeError("clamped_sample_one_sided on an empty layer");
  const Vec2 c = clamp_coord(layer.rows(), layer.cols(), coord);
  OneSidedGradient g;
  const auto [xl, xu] = slope_cells(coord.x, layer.cols());
  const auto [yl, yu] = slope_cells(coord.y, layer.rows());
  if (xl >= 0) g.lower.x = slope_x(layer, xl, c.y);
  if (xu >= 0) g.upper.x = slope_x(layer, xu, c.y);
  if (yl >= 0) g.lower.y = slope_y(layer, yl, c.x);
  if (yu >= 0) g.upper.y = slope_y(layer, yu, c.x);
  return g;
}

ValidSet occupancy(const GridMap& map) {
  const auto& count = map.layer(layer::kReflectionCount);
  ValidSet occ(map.rows(), map.cols(), 0);
  for (int y = 0; y < map.rows(); ++y) {
    for (int x = 0; x < map.cols(); ++x) occ(x, y) = count(x, y) > 0.0 ? 1 : 0;
  }
  return occ;
}

ValidSet valid_set(const ValidSet& source_occupancy, const FlowField& flow) {
  require_same_shape(source_occupancy, flow.displacement, "valid_set");
  ValidSet valid(flow.rows(), flow.cols(), 0);
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      const Vec2 mapped{x + flow(x, y).x, y + flow(x, y).y};
      valid(x, y) = source_occupancy(x, y) && coordinate_in_bounds(flow.rows(), flow.cols(), mapped) ? 1 : 0;
    }
  }
  return valid;
}

WarpResult warp_backward(const GridMap& target, const FlowField& flow) {
  return warp_backward(target, flow, ValidSet(flow.rows(), flow.cols(), 1));
}

WarpResult warp_backward(const GridMap& target, const FlowField& flow, const ValidSet& source_occupancy) {
  if (target.rows() != flow.rows() || target.cols() != flow.cols()) {
    throw ShapeError("warp_backward: flow and target map dimensions differ");
  }
  WarpResult out{GridMap(target.rows(), target.cols(), target.cell_size()), valid_set(source_occupancy, flow)};
  out.warped.set_frame_id(target.frame_id());
  for (const auto& l : target.layers()) {
    auto& dst = out.warped.add_layer(l.name);
    for (int y = 0; y < flow.rows(); ++y) {
      for (int x = 0; x < flow.cols(); ++x) {
        dst(x, y) = bilinear_sample(l.values, {x + flow(x, y).x, y + flow(x, y).y}).value;
      }
    }
  }
  return out;
}

}  // namespace gridflow
