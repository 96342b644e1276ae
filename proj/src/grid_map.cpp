#include "gridflow/grid_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace gridflow {
namespace {

int checked_cell_count(double extent_m, double cell_size_m, const char* what) {
  const double n = extent_m / cell_size_m;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-6 * std::max(1.0, rounded)) {
    throw ParameterError(std::string("grid ") + what + " must be a positive integer multiple of the cell size");
  }
  return static_cast<int>(rounded);
}

void validate_cloud(const PointCloud& cloud) {
  const auto& o = cloud.sensor_origin;
  if (!std::isfinite(o.x) || !std::isfinite(o.y) || !std::isfinite(o.z)) {
    throw ValidationError("sensor origin has non-finite coordinates");
  }
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(p.intensity)) {
      throw ValidationError("point record " + std::to_string(i) + " has non-finite values");
    }
    if (p.intensity < 0.0 || p.intensity > 1.0) {
      throw ValidationError("point record " + std::to_string(i) + " has intensity outside [0, 1]");
    }
  }
}

// Half-sample symmetric reflection (edge value repeated), periodic for any offset.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int j = i % period;
  if (j < 0) j += period;
  return j < n ? j : period - 1 - j;
}

}  // namespace

int GridConfig::cols() const { return checked_cell_count(width_m, cell_size_m, "width"); }
int GridConfig::rows() const { return checked_cell_count(height_m, cell_size_m, "height"); }

void GridConfig::validate() const {
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m)) throw ParameterError("cell size must be positive");
  if (!(width_m > 0.0) || !(height_m > 0.0)) throw ParameterError("map extent must be positive");
  (void)cols();
  (void)rows();
  if (!std::isfinite(sensor_origin.x) || !std::isfinite(sensor_origin.y) || !std::isfinite(sensor_origin.z)) {
    throw ParameterError("sensor origin must be finite");
  }
  if (sensor_origin.x < min_x() || sensor_origin.x >= -min_x() || sensor_origin.y < min_y() ||
      sensor_origin.y >= -min_y()) {
    throw ParameterError("sensor origin lies outside the map extent");
  }
}

GridMap::GridMap(int rows, int cols, double cell_size_m) : rows_(rows), cols_(cols), cell_size_m_(cell_size_m) {
  if (rows <= 0 || cols <= 0) throw ShapeError("grid map needs positive dimensions");
}

bool GridMap::has_layer(std::string_view name) const {
  return std::any_of(layers_.begin(), layers_.end(), [&](const Layer& l) { return l.name == name; });
}

const ScalarField& GridMap::layer(std::string_view name) const {
  for (const auto& l : layers_) {
    if (l.name == name) return l.values;
  }
  throw ParameterError("grid map has no layer '" + std::string(name) + "'");
}

ScalarField& GridMap::layer(std::string_view name) {
  return const_cast<ScalarField&>(std::as_const(*this).layer(name));
}

ScalarField& GridMap::add_layer(std::string_view name) {
  add_layer(name, ScalarField(rows_, cols_, 0.0));
  return layer(name);
}

void GridMap::add_layer(std::string_view name, ScalarField values) {
  if (values.rows() != rows_ || values.cols() != cols_) throw ShapeError("layer shape does not match grid map");
  for (auto& l : layers_) {
    if (l.name == name) {
      l.values = std::move(values);
      return;
    }
  }
  layers_.push_back({std::string(name), std::move(values)});
}

GridMap rasterize(const PointCloud& cloud, const GridConfig& cfg) {
  cfg.validate();
  validate_cloud(cloud);

  GridMap map(cfg.rows(), cfg.cols(), cfg.cell_size_m);
  auto& count = map.add_layer(layer::kReflectionCount);
  auto& min_h = map.add_layer(layer::kMinHeight);
  auto& max_h = map.add_layer(layer::kMaxHeight);
  auto& intensity = map.add_layer(layer::kMeanIntensity);

  for (const auto& p : cloud.points) {
    const double fx = std::floor((p.x - cfg.min_x()) / cfg.cell_size_m);
    const double fy = std::floor((p.y - cfg.min_y()) / cfg.cell_size_m);
    if (fx < 0.0 || fy < 0.0 || fx >= map.cols() || fy >= map.rows()) continue;
    const int x = static_cast<int>(fx);
    const int y = static_cast<int>(fy);
    if (count(x, y) == 0.0) {
      min_h(x, y) = p.z;
      max_h(x, y) = p.z;
    } else {
      min_h(x, y) = std::min(min_h(x, y), p.z);
      max_h(x, y) = std::max(max_h(x, y), p.z);
    }
    count(x, y) += 1.0;
    intensity(x, y) += p.intensity;
  }

  auto counts = count.values();
  auto sums = intensity.values();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0.0) sums[i] /= counts[i];
  }
  return map;
}

std::vector<std::array<int, 2>> traverse_cells(double x0, double y0, double x1, double y1) {
  std::vector<std::array<int, 2>> cells;
  int ix = static_cast<int>(std::floor(x0));
  int iy = static_cast<int>(std::floor(y0));
  const int ex = static_cast<int>(std::floor(x1));
  const int ey = static_cast<int>(std::floor(y1));
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  double t_max_x = step_x == 0 ? kInf : ((step_x > 0 ? ix + 1.0 : static_cast<double>(ix)) - x0) / dx;
  double t_max_y = step_y == 0 ? kInf : ((step_y > 0 ? iy + 1.0 : static_cast<double>(iy)) - y0) / dy;
  const double t_delta_x = step_x == 0 ? kInf : 1.0 / std::abs(dx);
  const double t_delta_y = step_y == 0 ? kInf : 1.0 / std::abs(dy);

  const int max_steps = std::abs(ex - ix) + std::abs(ey - iy);
  cells.reserve(static_cast<std::size_t>(max_steps) + 1);
  cells.push_back({ix, iy});
  int steps = 0;
  while ((ix != ex || iy != ey) && steps < max_steps) {
    if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += t_delta_x;
      ++steps;
    } else if (t_max_y < t_max_x) {
      iy += step_y;
      t_max_y += t_delta_y;
      ++steps;
    } else {
      // Exact corner crossing: the two side cells are only touched, not crossed.
      ix += step_x;
      iy += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
      steps += 2;
    }
    cells.push_back({ix, iy});
  }
  return cells;
}

ScalarField cast_shadows(const PointCloud& cloud, const GridConfig& cfg) {
  cfg.validate();
  validate_cloud(cloud);

  const int cols = cfg.cols();
  const int rows = cfg.rows();
  ScalarField shadow(rows, cols, 0.0);
  Field<std::uint8_t> touched(rows, cols, 0);

  const auto& o = cloud.sensor_origin;
  const double sx = (o.x - cfg.min_x()) / cfg.cell_size_m;
  const double sy = (o.y - cfg.min_y()) / cfg.cell_size_m;

  for (const auto& p : cloud.points) {
    const double px = (p.x - cfg.min_x()) / cfg.cell_size_m;
    const double py = (p.y - cfg.min_y()) / cfg.cell_size_m;
    const double dx = px - sx;
    const double dy = py - sy;
    const double len2 = dx * dx + dy * dy;
    for (const auto& [cx, cy] : traverse_cells(sx, sy, px, py)) {
      // The sensor lies inside the (convex) extent, so the ray never re-enters.
      if (!shadow.contains(cx, cy)) break;
      double s = 0.0;
      if (len2 > 0.0) {
        s = ((cx + 0.5 - sx) * dx + (cy + 0.5 - sy) * dy) / len2;
        s = std::clamp(s, 0.0, 1.0);
      }
      const double beam = o.z + s * (p.z - o.z);
      if (!touched(cx, cy) || beam < shadow(cx, cy)) shadow(cx, cy) = beam;
      touched(cx, cy) = 1;
    }
  }
  return shadow;
}

GridMap build_grid_map(const PointCloud& cloud, const GridConfig& cfg) {
  GridMap map = rasterize(cloud, cfg);
  map.add_layer(layer::kShadowHeight, cast_shadows(cloud, cfg));
  return map;
}

std::vector<double> gaussian_kernel(double sigma_cells) {
  if (!(sigma_cells >= 0.0) || !std::isfinite(sigma_cells)) throw ParameterError("blur sigma must be >= 0");
  if (sigma_cells == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_cells));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma_cells * sigma_cells));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : k) w /= sum;
  return k;
}

ScalarField gaussian_blur(const ScalarField& layer, double sigma_cells) {
  const auto kernel = gaussian_kernel(sigma_cells);
  if (kernel.size() == 1) return layer;
  const int radius = static_cast<int>(kernel.size() / 2);
  const int rows = layer.rows();
  const int cols = layer.cols();

  ScalarField tmp(rows, cols, 0.0);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * layer(reflect_index(x + k, cols), y);
      }
      tmp(x, y) = acc;
    }
  }
  ScalarField out(rows, cols, 0.0);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp(x, reflect_index(y + k, rows));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

GridMap gaussian_blur(const GridMap& map, double sigma_cells) {
  (void)gaussian_kernel(sigma_cells);
  GridMap out = map;
  for (auto& l : out.layers()) l.values = gaussian_blur(l.values, sigma_cells);
  return out;
}

}  // namespace gridflow
