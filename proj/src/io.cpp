#include "gridflow/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace gridflow {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* format) : bytes_(bytes), format_(format) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(std::string(format_) + ": " + what, pos_); }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string(format_) + ": truncated while reading " + what, pos_);
  }

  std::span<const std::uint8_t> bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

std::uint8_t to_byte(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Bytes encode_point_cloud(const PointCloud& cloud) {
  Writer w;
  for (const auto& p : cloud.points) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
    w.f32(static_cast<float>(p.z));
    w.f32(static_cast<float>(p.intensity));
  }
  return w.take();
}

PointCloud decode_point_cloud(std::span<const std::uint8_t> bytes, Point3 sensor_origin) {
  if (bytes.size() % 16 != 0) throw FormatError("point cloud: size is not a multiple of 16 bytes", bytes.size() - bytes.size() % 16);
  Reader r(bytes, "point cloud");
  PointCloud cloud;
  cloud.sensor_origin = sensor_origin;
  cloud.points.reserve(bytes.size() / 16);
  while (r.remaining() > 0) {
    LidarPoint p;
    p.x = r.f32("x");
    p.y = r.f32("y");
    p.z = r.f32("z");
    p.intensity = r.f32("intensity");
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, encode_point_cloud(cloud));
}

PointCloud read_point_cloud(const std::filesystem::path& path, Point3 sensor_origin) {
  return decode_point_cloud(read_file(path), sensor_origin);
}

Bytes encode_flo(const FlowField& flow) {
  Writer w;
  w.f32(kFloMagic);
  w.i32(flow.cols());
  w.i32(flow.rows());
  for (int y = 0; y < flow.rows(); ++y) {
    for (int x = 0; x < flow.cols(); ++x) {
      w.f32(static_cast<float>(flow(x, y).x));
      w.f32(static_cast<float>(flow(x, y).y));
    }
  }
  return w.take();
}

FlowField decode_flo(std::span<const std::uint8_t> bytes, FlowDirection direction) {
  Reader r(bytes, "flo");
  if (r.f32("magic") != kFloMagic) throw FormatError("flo: bad magic", 0);
  const auto width = r.i32("width");
  const auto height = r.i32("height");
  if (width <= 0 || height <= 0) throw FormatError("flo: non-positive dimensions", 4);
  FlowField flow(height, width, direction);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float u = r.f32("u");
      const float v = r.f32("v");
      flow(x, y) = {u, v};
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after flow data");
  return flow;
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) { write_file(path, encode_flo(flow)); }

FlowField read_flo(const std::filesystem::path& path, FlowDirection direction) {
  return decode_flo(read_file(path), direction);
}

Bytes encode_grid_map(const GridMap& map) {
  Writer w;
  w.raw("GMAP");
  w.u32(kGridMapVersion);
  w.u32(static_cast<std::uint32_t>(map.cols()));
  w.u32(static_cast<std::uint32_t>(map.rows()));
  w.f32(static_cast<float>(map.cell_size()));
  w.u32(static_cast<std::uint32_t>(map.layer_count()));
  for (const auto& l : map.layers()) {
    w.u32(static_cast<std::uint32_t>(l.name.size()));
    w.raw(l.name);
  }
  for (const auto& l : map.layers()) {
    for (double v : l.values.values()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

GridMap decode_grid_map(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "grid map");
  if (r.str(4, "magic") != "GMAP") throw FormatError("grid map: bad magic", 0);
  if (const auto version = r.u32("version"); version != kGridMapVersion) {
    throw FormatError("grid map: unsupported version " + std::to_string(version), 4);
  }
  const auto cols = r.u32("cols");
  const auto rows = r.u32("rows");
  const auto cell = r.f32("cell size");
  const auto n_layers = r.u32("layer count");
  if (cols == 0 || rows == 0 || cols > (1u << 20) || rows > (1u << 20)) r.fail("implausible dimensions");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto len = r.u32("layer name length");
    if (len > r.remaining()) r.fail("layer name length exceeds file size");
    names.push_back(r.str(len, "layer name"));
  }
  GridMap map(static_cast<int>(rows), static_cast<int>(cols), cell);
  for (const auto& name : names) {
    ScalarField f(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& v : f.values()) v = r.f32("layer data");
    map.add_layer(name, std::move(f));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after layer data");
  return map;
}

void write_grid_map(const std::filesystem::path& path, const GridMap& map) { write_file(path, encode_grid_map(map)); }

GridMap read_grid_map(const std::filesystem::path& path) { return decode_grid_map(read_file(path)); }

std::string pose_line(const RigidTransform2D& t) {
  const double c = std::cos(t.theta);
  const double s = std::sin(t.theta);
  const double m[12] = {c, -s, 0.0, t.t.x, s, c, 0.0, t.t.y, 0.0, 0.0, 1.0, 0.0};
  std::ostringstream os;
  os << std::setprecision(17);
  for (int i = 0; i < 12; ++i) os << (i ? " " : "") << m[i];
  return os.str();
}

RigidTransform2D parse_pose_line(const std::string& line, FlowDirection direction) {
  std::istringstream is(line);
  double m[12];
  for (double& v : m) {
    if (!(is >> v)) throw FormatError("pose line: expected 12 numbers", 0);
  }
  std::string extra;
  if (is >> extra) throw FormatError("pose line: more than 12 values", 0);
  return {std::atan2(m[4], m[0]), {m[3], m[7]}, direction};
}

void write_poses(const std::filesystem::path& path, const std::vector<RigidTransform2D>& poses) {
  std::string text;
  for (const auto& p : poses) text += pose_line(p) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<RigidTransform2D> read_poses(const std::filesystem::path& path, FlowDirection direction) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<RigidTransform2D> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      poses.push_back(parse_pose_line(line, direction));
    } catch (const FormatError&) {
      throw FormatError(path.string() + ": malformed pose on line " + std::to_string(line_no), 0);
    }
  }
  return poses;
}

std::array<std::uint8_t, 3> RgbImage::pixel(int x, int y) const {
  const auto i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

RgbImage render_flow_hsv(const FlowField& flow, double max_norm) {
  if (!(max_norm > 0.0)) {
    max_norm = 0.0;
    for (const auto& d : flow.displacement.values()) max_norm = std::max(max_norm, std::sqrt(d.squared_norm()));
    if (max_norm == 0.0) max_norm = 1.0;
  }
  RgbImage img{flow.cols(), flow.rows(), std::vector<std::uint8_t>(3 * flow.displacement.size(), 0)};
  std::size_t i = 0;
  for (const auto& d : flow.displacement.values()) {
    const double value = std::min(std::sqrt(d.squared_norm()) / max_norm, 1.0);
    double hue = std::atan2(d.y, d.x) * 180.0 / std::numbers::pi;
    if (hue < 0.0) hue += 360.0;
    if (hue >= 360.0) hue -= 360.0;
    const double h6 = hue / 60.0;
    const int sector = std::min(static_cast<int>(h6), 5);
    const double f = h6 - sector;
    const double p = 0.0;
    const double q = value * (1.0 - f);
    const double t = value * f;
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = value; g = t; b = p; break;
      case 1: r = q; g = value; b = p; break;
      case 2: r = p; g = value; b = t; break;
      case 3: r = p; g = q; b = value; break;
      case 4: r = t; g = p; b = value; break;
      default: r = value; g = p; b = q; break;
    }
    img.rgb[i++] = to_byte(r);
    img.rgb[i++] = to_byte(g);
    img.rgb[i++] = to_byte(b);
  }
  return img;
}

RgbImage render_gray(const ScalarField& values) {
  RgbImage img{values.cols(), values.rows(), {}};
  img.rgb.reserve(3 * values.size());
  for (double v : values.values()) {
    const auto g = to_byte(std::isfinite(v) ? v : 0.0);
    img.rgb.insert(img.rgb.end(), {g, g, g});
  }
  return img;
}

Bytes encode_ppm(const RgbImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) { write_file(path, encode_ppm(image)); }

}  // namespace gridflow
