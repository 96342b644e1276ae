#include "gridflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gridflow/rigid_motion.hpp"

namespace gridflow {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMaxStepM = 2.5;
constexpr double kMaxStepDeg = 5.0;

double draw(std::mt19937_64& rng, Range r) {
  if (r.min == r.max) return r.min;
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

void check_range(Range r, const char* what) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min > r.max) {
    throw ParameterError(std::string("synth: invalid range for ") + what);
  }
}

double max_abs(Range r) { return std::max(std::abs(r.min), std::abs(r.max)); }

bool inside_footprint(Vec2 q, double half_l, double half_w) { return std::abs(q.x) <= half_l && std::abs(q.y) <= half_w; }

void add_wall(std::mt19937_64& rng, const SynthConfig& cfg, Vec2 center, std::vector<LidarPoint>& out) {
  const double heading = draw(rng, {0.0, std::numbers::pi});
  const double length = draw(rng, {3.0, 10.0});
  const double base_intensity = draw(rng, {0.2, 0.7});
  const double top = draw(rng, {1.2, 2.6});
  const double period = draw(rng, {1.0, 4.0});
  const double phase = draw(rng, {0.0, 2.0 * std::numbers::pi});
  const Vec2 dir{std::cos(heading), std::sin(heading)};
  const int n = static_cast<int>(length / cfg.point_spacing_m);
  for (int i = 0; i <= n; ++i) {
    const double s = -0.5 * length + i * cfg.point_spacing_m;
    const double wave = std::sin(2.0 * std::numbers::pi * s / period + phase);
    const double h = top + 0.6 * wave;
    const double intensity = std::clamp(base_intensity + 0.25 * wave, 0.0, 1.0);
    const Vec2 p = center + s * dir;
    for (double z = 0.2; z <= h; z += 0.3) out.push_back({p.x, p.y, z, intensity});
  }
}

void add_pillar(std::mt19937_64& rng, const SynthConfig& cfg, Vec2 center, std::vector<LidarPoint>& out) {
  const double radius = draw(rng, {0.2, 0.9});
  const double top = draw(rng, {0.8, 3.0});
  const double intensity = draw(rng, {0.1, 0.95});
  const int n = std::max(6, static_cast<int>(2.0 * std::numbers::pi * radius / cfg.point_spacing_m));
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    for (double z = 0.2; z <= top; z += 0.3) {
      out.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a), z, intensity});
    }
  }
}

void add_clutter(std::mt19937_64& rng, Vec2 center, std::vector<LidarPoint>& out) {
  const double top = draw(rng, {0.3, 1.2});
  const double intensity = draw(rng, {0.0, 1.0});
  for (double z = 0.1; z <= top; z += 0.15) out.push_back({center.x, center.y, z, intensity});
}

std::vector<LidarPoint> object_points(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::vector<LidarPoint> pts;
  const double hl = 0.5 * cfg.object_length_m;
  const double hw = 0.5 * cfg.object_width_m;
  const double base = draw(rng, {0.6, 0.95});
  const double roof = draw(rng, {1.3, 1.7});
  // Vehicle-like top surface: low hood and trunk, high cabin.
  auto profile = [&](double x) {
    const double u = (x + hl) / (2.0 * hl);
    if (u < 0.3) return 0.55 * roof;
    if (u < 0.8) return roof;
    return 0.7 * roof;
  };
  const double step = 2.0 * cfg.point_spacing_m;
  for (double x = -hl; x <= hl; x += step) {
    for (double y = -hw; y <= hw; y += step) {
      const bool rim = x - step < -hl || x + step > hl || y - step < -hw || y + step > hw;
      const double top = profile(x);
      const double intensity = std::clamp(base - 0.3 * (top / roof) + (rim ? 0.1 : 0.0), 0.0, 1.0);
      if (rim) {
        for (double z = 0.3; z < top; z += 0.25) pts.push_back({x, y, z, intensity});
      }
      pts.push_back({x, y, top, intensity});
    }
  }
  return pts;
}

Vec2 to_cells(Vec2 p_m, double cell_size, Vec2 center) { return {p_m.x / cell_size + center.x, p_m.y / cell_size + center.y}; }

}  // namespace

void SynthConfig::validate() const {
  if (frames < 2) throw ParameterError("synth: need at least two frames");
  grid.validate();
  for (auto [r, name] : {std::pair{ego_forward_m, "ego_forward_m"}, {ego_lateral_m, "ego_lateral_m"},
                         {ego_yaw_deg, "ego_yaw_deg"}, {start_yaw_deg, "start_yaw_deg"},
                         {start_offset_m, "start_offset_m"}, {object_speed_m, "object_speed_m"},
                         {object_yaw_rate_deg, "object_yaw_rate_deg"}}) {
    check_range(r, name);
  }
  if (std::hypot(max_abs(ego_forward_m), max_abs(ego_lateral_m)) > kMaxStepM) {
    throw ParameterError("synth: ego translation per frame exceeds 2.5 m");
  }
  if (max_abs(ego_yaw_deg) > kMaxStepDeg) throw ParameterError("synth: ego rotation per frame exceeds 5 degrees");
  if (max_abs(start_yaw_deg) > 10.0 || max_abs(start_offset_m) > 3.5) {
    throw ParameterError("synth: start pose perturbation exceeds [-10 deg, 10 deg] / [-3.5 m, 3.5 m]");
  }
  if (walls < 0 || pillars < 0 || clutter < 0 || objects < 0) throw ParameterError("synth: negative element count");
  if (!(point_spacing_m > 0.0) || !(world_radius_m > 0.0)) throw ParameterError("synth: spacing and radius must be > 0");
  if (!(object_length_m > 0.0) || !(object_width_m > 0.0) || object_margin_m < 0.0) {
    throw ParameterError("synth: invalid object dimensions");
  }
  if (noise_sigma_m < 0.0) throw ParameterError("synth: noise sigma must be >= 0");
}

Scenario generate_scenario(std::uint64_t seed, const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Scenario s;
  s.seed = seed;
  s.config = cfg;

  RigidTransform2D pose{draw(rng, cfg.start_yaw_deg) * kDeg,
                        {draw(rng, cfg.start_offset_m), draw(rng, cfg.start_offset_m)}};
  s.ego_poses.push_back(pose);
  for (int k = 1; k < cfg.frames; ++k) {
    const RigidTransform2D step{draw(rng, cfg.ego_yaw_deg) * kDeg,
                                {draw(rng, cfg.ego_forward_m), draw(rng, cfg.ego_lateral_m)}};
    pose = compose(pose, step);
    s.ego_poses.push_back(pose);
  }

  // Background around the middle of the trajectory.
  const Vec2 mid = 0.5 * (s.ego_poses.front().t + s.ego_poses.back().t);
  auto in_disk = [&]() {
    const double r = cfg.world_radius_m * std::sqrt(draw(rng, {0.0, 1.0}));
    const double a = draw(rng, {0.0, 2.0 * std::numbers::pi});
    return mid + Vec2{r * std::cos(a), r * std::sin(a)};
  };
  for (int i = 0; i < cfg.walls; ++i) add_wall(rng, cfg, in_disk(), s.background);
  for (int i = 0; i < cfg.pillars; ++i) add_pillar(rng, cfg, in_disk(), s.background);
  for (int i = 0; i < cfg.clutter; ++i) add_clutter(rng, in_disk(), s.background);

  const double reach = 0.3 * std::min(cfg.grid.width_m, cfg.grid.height_m);
  for (int i = 0; i < cfg.objects; ++i) {
    SceneObject obj;
    obj.length_m = cfg.object_length_m;
    obj.width_m = cfg.object_width_m;
    const Vec2 rel{draw(rng, {-reach, reach}), draw(rng, {-reach, reach})};
    RigidTransform2D op{wrap_angle(s.ego_poses.front().theta + draw(rng, {-std::numbers::pi, std::numbers::pi})),
                        s.ego_poses.front().apply(rel)};
    const RigidTransform2D velocity{draw(rng, cfg.object_yaw_rate_deg) * kDeg, {draw(rng, cfg.object_speed_m), 0.0}};
    for (int k = 0; k < cfg.frames; ++k) {
      obj.poses.push_back(op);
      op = compose(op, velocity);
    }
    obj.points = object_points(cfg, rng);
    s.objects.push_back(std::move(obj));
  }

  // Keep labels clean: no static structure inside any swept object footprint.
  const double clear = cfg.object_margin_m + cfg.grid.cell_size_m;
  std::erase_if(s.background, [&](const LidarPoint& p) {
    for (const auto& obj : s.objects) {
      for (const auto& op : obj.poses) {
        const Vec2 q = op.inverse().apply({p.x, p.y});
        if (inside_footprint(q, 0.5 * obj.length_m + clear, 0.5 * obj.width_m + clear)) return true;
      }
    }
    return false;
  });
  return s;
}

PointCloud render_frame(const Scenario& scenario, int frame, double noise_sigma_m) {
  if (frame < 0 || frame >= scenario.frames()) throw ParameterError("render_frame: frame index out of range");
  PointCloud cloud;
  cloud.sensor_origin = scenario.config.grid.sensor_origin;
  const RigidTransform2D world_to_ego = scenario.ego_poses[static_cast<std::size_t>(frame)].inverse();
  std::mt19937_64 rng(scenario.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(frame + 1)));
  std::normal_distribution<double> noise(0.0, noise_sigma_m > 0.0 ? noise_sigma_m : 1.0);

  auto emit = [&](Vec2 world, double z, double intensity) {
    Vec2 p = world_to_ego.apply(world);
    if (noise_sigma_m > 0.0) {
      p.x += noise(rng);
      p.y += noise(rng);
      z += noise(rng);
    }
    cloud.points.push_back({p.x, p.y, z, intensity});
  };
  for (const auto& p : scenario.background) emit({p.x, p.y}, p.z, p.intensity);
  for (const auto& obj : scenario.objects) {
    const auto& op = obj.poses[static_cast<std::size_t>(frame)];
    for (const auto& p : obj.points) emit(op.apply({p.x, p.y}), p.z, p.intensity);
  }
  return cloud;
}

std::vector<PointCloud> render_frames(const Scenario& scenario) {
  std::vector<PointCloud> clouds;
  for (int k = 0; k < scenario.frames(); ++k) clouds.push_back(render_frame(scenario, k, scenario.config.noise_sigma_m));
  return clouds;
}

RigidTransform2D true_relative_transform(const Scenario& scenario, int pair) {
  if (pair < 0 || pair + 1 >= scenario.frames()) throw ParameterError("true_relative_transform: pair out of range");
  const auto& a = scenario.ego_poses[static_cast<std::size_t>(pair)];
  const auto& b = scenario.ego_poses[static_cast<std::size_t>(pair + 1)];
  RigidTransform2D rel = compose(b.inverse(), a);
  rel.direction = FlowDirection::kForward;
  return rel;
}

std::vector<ObjectBox> object_boxes(const Scenario& scenario, int frame, const GridConfig& grid) {
  const Vec2 c = grid_center(grid.rows(), grid.cols());
  const RigidTransform2D world_to_ego = scenario.ego_poses[static_cast<std::size_t>(frame)].inverse();
  std::vector<ObjectBox> boxes;
  for (std::size_t i = 0; i < scenario.objects.size(); ++i) {
    const auto& obj = scenario.objects[i];
    const auto& op = obj.poses[static_cast<std::size_t>(frame)];
    Box b{1e300, 1e300, -1e300, -1e300};
    for (double sx : {-0.5, 0.5}) {
      for (double sy : {-0.5, 0.5}) {
        const Vec2 cell = to_cells(world_to_ego.apply(op.apply({sx * obj.length_m, sy * obj.width_m})), grid.cell_size_m, c);
        b.xmin = std::min(b.xmin, cell.x);
        b.ymin = std::min(b.ymin, cell.y);
        b.xmax = std::max(b.xmax, cell.x);
        b.ymax = std::max(b.ymax, cell.y);
      }
    }
    boxes.push_back({static_cast<int>(i), b});
  }
  return boxes;
}

GroundTruth ground_truth_flow(const Scenario& scenario, int pair, const GridConfig& grid) {
  grid.validate();
  const int rows = grid.rows();
  const int cols = grid.cols();
  const double cs = grid.cell_size_m;
  const Vec2 c = grid_center(rows, cols);

  const RigidTransform2D rel_m = true_relative_transform(scenario, pair);
  GroundTruth gt;
  gt.transform_fw = rel_m.scaled(1.0 / cs);
  gt.transform_bw = rel_m.inverse().scaled(1.0 / cs);
  gt.flow = motion_flow(gt.transform_fw, rows, cols);
  gt.moving = Field<std::uint8_t>(rows, cols, 0);

  const auto& ego1 = scenario.ego_poses[static_cast<std::size_t>(pair)];
  const RigidTransform2D world_to_ego2 = scenario.ego_poses[static_cast<std::size_t>(pair + 1)].inverse();
  const double margin = scenario.config.object_margin_m;
  for (const auto& obj : scenario.objects) {
    const RigidTransform2D world_to_obj1 = obj.poses[static_cast<std::size_t>(pair)].inverse();
    const auto& obj2 = obj.poses[static_cast<std::size_t>(pair + 1)];
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        if (gt.moving(x, y)) continue;
        const Vec2 p_m{(x - c.x) * cs, (y - c.y) * cs};
        const Vec2 q = world_to_obj1.apply(ego1.apply(p_m));
        if (!inside_footprint(q, 0.5 * obj.length_m + margin, 0.5 * obj.width_m + margin)) continue;
        const Vec2 p2 = world_to_ego2.apply(obj2.apply(q));
        gt.flow(x, y) = {(p2.x - p_m.x) / cs, (p2.y - p_m.y) / cs};
        gt.moving(x, y) = 1;
      }
    }
  }
  gt.boxes1 = object_boxes(scenario, pair, grid);
  gt.boxes2 = object_boxes(scenario, pair + 1, grid);
  return gt;
}

}  // namespace gridflow
