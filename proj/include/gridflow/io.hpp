#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gridflow/grid_map.hpp"
#include "gridflow/losses.hpp"
#include "gridflow/rigid_transform.hpp"
#include "gridflow/warp.hpp"

namespace gridflow {

using Bytes = std::vector<std::uint8_t>;

inline constexpr float kFloMagic = 202021.25f;
inline constexpr std::uint32_t kGridMapVersion = 1;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// KITTI velodyne layout: float32 x, y, z, intensity per record, no header.
Bytes encode_point_cloud(const PointCloud& cloud);
PointCloud decode_point_cloud(std::span<const std::uint8_t> bytes, Point3 sensor_origin = {});
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_point_cloud(const std::filesystem::path& path, Point3 sensor_origin = {});

// Middlebury .flo: magic float 202021.25, int32 width, int32 height, then
// row-major interleaved float32 (u, v).
Bytes encode_flo(const FlowField& flow);
FlowField decode_flo(std::span<const std::uint8_t> bytes, FlowDirection direction = FlowDirection::kForward);
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path, FlowDirection direction = FlowDirection::kForward);

// Grid-map container: "GMAP", u32 version, u32 cols, u32 rows, f32 cell size,
// u32 layer count, per layer a u32-length-prefixed name, then every layer's
// row-major float32 data in the same order.
Bytes encode_grid_map(const GridMap& map);
GridMap decode_grid_map(std::span<const std::uint8_t> bytes);
void write_grid_map(const std::filesystem::path& path, const GridMap& map);
GridMap read_grid_map(const std::filesystem::path& path);

/// 12 numbers: the row-major 3x4 matrix of the planar motion lifted to 3D.
std::string pose_line(const RigidTransform2D& t);
RigidTransform2D parse_pose_line(const std::string& line, FlowDirection direction = FlowDirection::kForward);
void write_poses(const std::filesystem::path& path, const std::vector<RigidTransform2D>& poses);
std::vector<RigidTransform2D> read_poses(const std::filesystem::path& path,
                                         FlowDirection direction = FlowDirection::kForward);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major RGB triplets

  std::array<std::uint8_t, 3> pixel(int x, int y) const;
};

/// Hue = flow direction, value = min(|d| / max_norm, 1), saturation 1.
/// max_norm <= 0 selects the field maximum.
RgbImage render_flow_hsv(const FlowField& flow, double max_norm = 0.0);
/// Gray levels for values in [0, 1].
RgbImage render_gray(const ScalarField& values);

Bytes encode_ppm(const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

}  // namespace gridflow
