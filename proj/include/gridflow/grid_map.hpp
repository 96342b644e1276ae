#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/field.hpp"

namespace gridflow {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct LidarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
};

struct PointCloud {
  std::vector<LidarPoint> points;
  Point3 sensor_origin;
};

/// Map extent is [-width/2, width/2] x [-height/2, height/2] in the cloud
/// frame, so the grid center coincides with the cloud frame origin.
struct GridConfig {
  double width_m = 60.0;
  double height_m = 60.0;
  double cell_size_m = 0.15;
  Point3 sensor_origin;

  int cols() const;
  int rows() const;
  double min_x() const { return -0.5 * width_m; }
  double min_y() const { return -0.5 * height_m; }
  // Throws ParameterError when the invariants do not hold.
  void validate() const;
};

namespace layer {
inline constexpr std::string_view kReflectionCount = "reflection_count";
inline constexpr std::string_view kMinHeight = "min_height_m";
inline constexpr std::string_view kMaxHeight = "max_height_m";
inline constexpr std::string_view kMeanIntensity = "mean_intensity";
inline constexpr std::string_view kShadowHeight = "shadow_height_m";
}  // namespace layer

struct Layer {
  std::string name;
  ScalarField values;

  friend bool operator==(const Layer&, const Layer&) = default;
};

class GridMap {
 public:
  GridMap() = default;
  GridMap(int rows, int cols, double cell_size_m);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double cell_size() const { return cell_size_m_; }
  int frame_id() const { return frame_id_; }
  void set_frame_id(int id) { frame_id_ = id; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }

  bool has_layer(std::string_view name) const;
  const ScalarField& layer(std::string_view name) const;
  ScalarField& layer(std::string_view name);
  // Adds a zero-initialized layer, or replaces an existing one of the same name.
  ScalarField& add_layer(std::string_view name);
  void add_layer(std::string_view name, ScalarField values);

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  double cell_size_m_ = 0.0;
  int frame_id_ = 0;
  std::vector<Layer> layers_;
};

/// Accumulates reflection count, min/max height and mean intensity per cell.
/// Points outside the extent are dropped; empty cells hold zeros.
GridMap rasterize(const PointCloud& cloud, const GridConfig& cfg);

/// Beam height of the lowest ray crossing each cell, from the sensor origin
/// to every reflection. Cells no ray crosses hold 0.
ScalarField cast_shadows(const PointCloud& cloud, const GridConfig& cfg);

/// rasterize() plus the shadow layer.
GridMap build_grid_map(const PointCloud& cloud, const GridConfig& cfg);

/// Cells visited by the 2D ray between two continuous cell coordinates, in
/// traversal order, each exactly once. The start cell comes first.
std::vector<std::array<int, 2>> traverse_cells(double x0, double y0, double x1, double y1);

std::vector<double> gaussian_kernel(double sigma_cells);
ScalarField gaussian_blur(const ScalarField& layer, double sigma_cells);
GridMap gaussian_blur(const GridMap& map, double sigma_cells);

}  // namespace gridflow
