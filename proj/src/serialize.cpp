#include "gridflow/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "gridflow/errors.hpp"

namespace gridflow {
namespace {

// Reads optional keys from an object and rejects anything it was not asked about.
class KeyReader {
 public:
  KeyReader(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ParameterError(context_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ParameterError(context_ + "." + key + ": wrong value type");
    }
  }

  const Json* sub(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ParameterError(context_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

Json range_json(const Range& r) { return Json::array({r.min, r.max}); }

void read_range(KeyReader& kr, const std::string& key, Range& r) {
  std::vector<double> v{r.min, r.max};
  kr.read(key, v);
  if (v.size() != 2) throw ParameterError("synth." + key + ": expected [min, max]");
  r = {v[0], v[1]};
}

Json vec_json(Vec2 v) { return Json::array({v.x, v.y}); }

}  // namespace

Json to_json(const GridConfig& cfg) {
  Json j;
  j["width_m"] = cfg.width_m;
  j["height_m"] = cfg.height_m;
  j["cell_size_m"] = cfg.cell_size_m;
  j["sensor_origin"] = Json::array({cfg.sensor_origin.x, cfg.sensor_origin.y, cfg.sensor_origin.z});
  return j;
}

GridConfig grid_config_from_json(const Json& j, GridConfig base) {
  KeyReader kr(j, "grid");
  kr.read("width_m", base.width_m);
  kr.read("height_m", base.height_m);
  kr.read("cell_size_m", base.cell_size_m);
  std::vector<double> o{base.sensor_origin.x, base.sensor_origin.y, base.sensor_origin.z};
  kr.read("sensor_origin", o);
  if (o.size() != 3) throw ParameterError("grid.sensor_origin: expected [x, y, z]");
  base.sensor_origin = {o[0], o[1], o[2]};
  kr.finish();
  return base;
}

Json to_json(const SynthConfig& cfg) {
  Json j;
  j["frames"] = cfg.frames;
  j["grid"] = to_json(cfg.grid);
  j["ego_forward_m"] = range_json(cfg.ego_forward_m);
  j["ego_lateral_m"] = range_json(cfg.ego_lateral_m);
  j["ego_yaw_deg"] = range_json(cfg.ego_yaw_deg);
  j["start_yaw_deg"] = range_json(cfg.start_yaw_deg);
  j["start_offset_m"] = range_json(cfg.start_offset_m);
  j["walls"] = cfg.walls;
  j["pillars"] = cfg.pillars;
  j["clutter"] = cfg.clutter;
  j["world_radius_m"] = cfg.world_radius_m;
  j["point_spacing_m"] = cfg.point_spacing_m;
  j["objects"] = cfg.objects;
  j["object_speed_m"] = range_json(cfg.object_speed_m);
  j["object_yaw_rate_deg"] = range_json(cfg.object_yaw_rate_deg);
  j["object_length_m"] = cfg.object_length_m;
  j["object_width_m"] = cfg.object_width_m;
  j["object_margin_m"] = cfg.object_margin_m;
  j["noise_sigma_m"] = cfg.noise_sigma_m;
  return j;
}

SynthConfig synth_config_from_json(const Json& j, SynthConfig base) {
  KeyReader kr(j, "synth");
  kr.read("frames", base.frames);
  if (const Json* g = kr.sub("grid")) base.grid = grid_config_from_json(*g, base.grid);
  read_range(kr, "ego_forward_m", base.ego_forward_m);
  read_range(kr, "ego_lateral_m", base.ego_lateral_m);
  read_range(kr, "ego_yaw_deg", base.ego_yaw_deg);
  read_range(kr, "start_yaw_deg", base.start_yaw_deg);
  read_range(kr, "start_offset_m", base.start_offset_m);
  kr.read("walls", base.walls);
  kr.read("pillars", base.pillars);
  kr.read("clutter", base.clutter);
  kr.read("world_radius_m", base.world_radius_m);
  kr.read("point_spacing_m", base.point_spacing_m);
  kr.read("objects", base.objects);
  read_range(kr, "object_speed_m", base.object_speed_m);
  read_range(kr, "object_yaw_rate_deg", base.object_yaw_rate_deg);
  kr.read("object_length_m", base.object_length_m);
  kr.read("object_width_m", base.object_width_m);
  kr.read("object_margin_m", base.object_margin_m);
  kr.read("noise_sigma_m", base.noise_sigma_m);
  kr.finish();
  return base;
}

const char* to_string(StencilMode mode) {
  return mode == StencilMode::kSecondDifference ? "second_difference" : "central_first_difference";
}

StencilMode stencil_mode_from_string(const std::string& s) {
  if (s == "second_difference") return StencilMode::kSecondDifference;
  if (s == "central_first_difference") return StencilMode::kCentralFirstDifference;
  throw ParameterError("unknown stencil '" + s + "'");
}

const char* to_string(SpatialMaskMode mode) {
  return mode == SpatialMaskMode::kGradientMagnitude ? "gradient_magnitude" : "complement";
}

SpatialMaskMode spatial_mask_mode_from_string(const std::string& s) {
  if (s == "gradient_magnitude") return SpatialMaskMode::kGradientMagnitude;
  if (s == "complement") return SpatialMaskMode::kComplement;
  throw ParameterError("unknown spatial mask mode '" + s + "'");
}

Json to_json(const OptimizerConfig& cfg) {
  Json j;
  j["pyramid_levels"] = cfg.pyramid_levels;
  j["max_displacement_cells"] = cfg.max_displacement_cells;
  j["steps_per_level"] = cfg.steps_per_level;
  j["outer_alternations"] = cfg.outer_alternations;
  j["step_size"] = cfg.step_size;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["adam_epsilon"] = cfg.adam_epsilon;
  j["max_backtracks"] = cfg.max_backtracks;
  j["sigma_schedule"] = cfg.sigma_schedule;
  j["weight_data"] = cfg.weights.data;
  j["weight_motion"] = cfg.weights.motion;
  j["weight_spatial"] = cfg.weights.spatial;
  j["weight_reg"] = cfg.weights.reg;
  j["stencil"] = to_string(cfg.loss_options.stencil);
  j["differentiable_motion_mask"] = cfg.loss_options.differentiable_motion_mask;
  j["occlusion_alpha1"] = cfg.occlusion.alpha1;
  j["occlusion_alpha2"] = cfg.occlusion.alpha2;
  j["use_occlusion_mask"] = cfg.use_occlusion_mask;
  j["occlusion_finest_only"] = cfg.occlusion_finest_only;
  j["spatial_mask_mode"] = to_string(cfg.spatial_mask_mode);
  j["irls_iterations"] = cfg.irls_iterations;
  j["tolerance"] = cfg.tolerance;
  j["feature_gain"] = cfg.feature_gain;
  j["normalize_levels"] = cfg.normalize_levels;
  j["feature_layers"] = cfg.feature_layers;
  return j;
}

OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base) {
  KeyReader kr(j, "optimizer");
  kr.read("pyramid_levels", base.pyramid_levels);
  kr.read("max_displacement_cells", base.max_displacement_cells);
  kr.read("steps_per_level", base.steps_per_level);
  kr.read("outer_alternations", base.outer_alternations);
  kr.read("step_size", base.step_size);
  kr.read("beta1", base.beta1);
  kr.read("beta2", base.beta2);
  kr.read("adam_epsilon", base.adam_epsilon);
  kr.read("max_backtracks", base.max_backtracks);
  kr.read("sigma_schedule", base.sigma_schedule);
  kr.read("weight_data", base.weights.data);
  kr.read("weight_motion", base.weights.motion);
  kr.read("weight_spatial", base.weights.spatial);
  kr.read("weight_reg", base.weights.reg);
  std::string stencil = to_string(base.loss_options.stencil);
  kr.read("stencil", stencil);
  base.loss_options.stencil = stencil_mode_from_string(stencil);
  kr.read("differentiable_motion_mask", base.loss_options.differentiable_motion_mask);
  kr.read("occlusion_alpha1", base.occlusion.alpha1);
  kr.read("occlusion_alpha2", base.occlusion.alpha2);
  kr.read("use_occlusion_mask", base.use_occlusion_mask);
  kr.read("occlusion_finest_only", base.occlusion_finest_only);
  std::string spatial = to_string(base.spatial_mask_mode);
  kr.read("spatial_mask_mode", spatial);
  base.spatial_mask_mode = spatial_mask_mode_from_string(spatial);
  kr.read("irls_iterations", base.irls_iterations);
  kr.read("tolerance", base.tolerance);
  kr.read("feature_gain", base.feature_gain);
  kr.read("normalize_levels", base.normalize_levels);
  kr.read("feature_layers", base.feature_layers);
  kr.finish();
  return base;
}

Json to_json(const RigidTransform2D& t) {
  Json j;
  j["theta"] = t.theta;
  j["tx"] = t.t.x;
  j["ty"] = t.t.y;
  j["direction"] = to_string(t.direction);
  return j;
}

Json to_json(const TermValue& t) {
  Json j;
  j["robust"] = t.robust;
  j["regularizer"] = t.regularizer;
  j["cells"] = t.cells;
  return j;
}

namespace {
Json direction_json(const DirectionBreakdown& d, const LossWeights& w) {
  Json j;
  j["data"] = to_json(d.data);
  j["motion"] = to_json(d.motion);
  j["spatial"] = to_json(d.spatial);
  j["valid_cells"] = d.valid_cells;
  j["weighted"] = d.weighted(w);
  return j;
}
}  // namespace

Json to_json(const LossBreakdown& b) {
  Json j;
  j["weights"] = {{"data", b.weights.data}, {"motion", b.weights.motion}, {"spatial", b.weights.spatial},
                  {"reg", b.weights.reg}};
  j["forward"] = direction_json(b.forward, b.weights);
  j["backward"] = direction_json(b.backward, b.weights);
  j["total"] = b.total;
  return j;
}

Json to_json(const Scenario& s) {
  Json j;
  j["seed"] = s.seed;
  j["config"] = to_json(s.config);
  Json ego = Json::array();
  for (const auto& p : s.ego_poses) ego.push_back(to_json(p));
  j["ego_poses"] = ego;
  j["background_points"] = s.background.size();
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    Json jo;
    jo["length_m"] = o.length_m;
    jo["width_m"] = o.width_m;
    jo["points"] = o.points.size();
    Json poses = Json::array();
    for (const auto& p : o.poses) poses.push_back(to_json(p));
    jo["poses"] = poses;
    objs.push_back(jo);
  }
  j["objects"] = objs;
  return j;
}

Json to_json(const Box& b) { return Json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

Json to_json(const std::vector<ObjectBox>& boxes) {
  Json arr = Json::array();
  for (const auto& b : boxes) arr.push_back({{"id", b.id}, {"box", to_json(b.box)}});
  return arr;
}

std::vector<ObjectBox> boxes_from_json(const Json& j) {
  if (!j.is_array()) throw ParameterError("boxes: expected a JSON array");
  std::vector<ObjectBox> out;
  for (const auto& e : j) {
    KeyReader kr(e, "boxes[]");
    ObjectBox ob;
    std::vector<double> b;
    kr.read("id", ob.id);
    kr.read("box", b);
    kr.finish();
    if (b.size() != 4) throw ParameterError("boxes[].box: expected [xmin, ymin, xmax, ymax]");
    ob.box = {b[0], b[1], b[2], b[3]};
    out.push_back(ob);
  }
  return out;
}

Json to_json(const EpeStats& e) {
  return {{"mean", e.mean}, {"median", e.median}, {"max", e.max}, {"count", e.count}};
}

Json to_json(const OdometryMetrics& m) {
  Json j;
  j["empty"] = m.empty;
  j["samples"] = m.samples;
  j["are_rad_per_m"] = m.are;
  j["are_1e-3_deg_per_m"] = m.are_deg_per_m_e3();
  j["ate"] = m.ate;
  j["ate_percent"] = m.ate_percent();
  Json per = Json::array();
  for (const auto& l : m.per_length) {
    per.push_back({{"length_m", l.length_m}, {"are_rad_per_m", l.are}, {"ate", l.ate}, {"samples", l.samples}});
  }
  j["per_length"] = per;
  return j;
}

Json to_json(const IouReport& r) {
  Json j;
  Json objs = Json::array();
  for (const auto& o : r.objects) {
    objs.push_back({{"id", o.id}, {"iou", o.iou}, {"mean_flow", vec_json(o.mean_flow)}, {"predicted", to_json(o.predicted)}});
  }
  j["objects"] = objs;
  j["mean"] = r.mean;
  j["skipped"] = r.skipped;
  return j;
}

Json to_json(const PairEvaluation& p) {
  Json j;
  j["seed"] = p.seed;
  j["pair"] = p.pair;
  j["epe"] = to_json(p.epe);
  j["translation_error_cells"] = p.translation_error_cells;
  j["rotation_error_rad"] = p.rotation_error_rad;
  j["iou"] = to_json(p.iou);
  j["estimated"] = to_json(p.estimated);
  j["truth"] = to_json(p.truth);
  return j;
}

Json to_json(const SuiteSummary& s) {
  Json j;
  j["mean_epe"] = s.mean_epe;
  j["max_epe"] = s.max_epe;
  j["mean_translation_error"] = s.mean_translation_error;
  j["max_translation_error"] = s.max_translation_error;
  j["mean_rotation_error"] = s.mean_rotation_error;
  j["mean_iou"] = s.mean_iou;
  j["iou_objects"] = s.iou_objects;
  Json pairs = Json::array();
  for (const auto& p : s.pairs) pairs.push_back(to_json(p));
  j["pairs"] = pairs;
  return j;
}

Json to_json(const std::vector<AblationRow>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["variant"] = r.variant.name;
    j["blur"] = r.variant.blur;
    j["motion_spatial"] = r.variant.motion_spatial;
    j["summary"] = to_json(r.summary);
    arr.push_back(j);
  }
  return arr;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON", e.byte > 0 ? e.byte - 1 : 0);
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gridflow
