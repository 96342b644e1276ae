#include "gridflow/config.hpp"

#include <cstdlib>
#include <string>

#include "gridflow/errors.hpp"

namespace gridflow {

OptimizerConfig RunConfig::effective_optimizer() const {
  OptimizerConfig cfg = optimizer;
  if (!flags.blur) cfg.sigma_schedule = {0.0};
  if (!flags.motion_spatial) {
    cfg.weights.motion = 0.0;
    cfg.weights.spatial = 0.0;
  }
  cfg.spatial_mask_mode = flags.spatial_mask_mode;
  return cfg;
}

SynthConfig RunConfig::effective_synth() const {
  SynthConfig s = synth;
  s.grid = grid;
  return s;
}

void RunConfig::validate(std::size_t need_inputs) const {
  if (jobs < 1) throw ParameterError("jobs must be >= 1");
  grid.validate();
  effective_synth().validate();
  effective_optimizer().validate();
  if (eval_lengths.empty()) throw ParameterError("eval_lengths must not be empty");
  for (double l : eval_lengths) {
    if (!(l > 0.0)) throw ParameterError("eval_lengths must be > 0");
  }
  if (output_dir.empty()) throw ParameterError("output directory must not be empty");
  if (inputs.size() < need_inputs) {
    throw ParameterError("expected at least " + std::to_string(need_inputs) + " input path(s), got " +
                         std::to_string(inputs.size()));
  }
  for (const auto& p : inputs) {
    if (p.empty()) throw ParameterError("input paths must not be empty");
  }
}

Json to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["grid"] = to_json(cfg.grid);
  Json synth = to_json(cfg.synth);
  synth.erase("grid");
  j["synth"] = synth;
  j["optimizer"] = to_json(cfg.optimizer);
  j["flags"] = {{"blur", cfg.flags.blur},
                {"motion_spatial", cfg.flags.motion_spatial},
                {"spatial_mask_mode", to_string(cfg.flags.spatial_mask_mode)}};
  j["eval_lengths"] = cfg.eval_lengths;
  Json inputs = Json::array();
  for (const auto& p : cfg.inputs) inputs.push_back(p.generic_string());
  j["inputs"] = inputs;
  j["output_dir"] = cfg.output_dir.generic_string();
  return j;
}

RunConfig run_config_from_json(const Json& j, RunConfig base) {
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else if (key == "jobs") {
        base.jobs = value.get<int>();
      } else if (key == "grid") {
        base.grid = grid_config_from_json(value, base.grid);
      } else if (key == "synth") {
        if (value.is_object() && value.contains("grid")) {
          throw ParameterError("config: set the grid at the top level, not under synth");
        }
        base.synth = synth_config_from_json(value, base.synth);
      } else if (key == "optimizer") {
        base.optimizer = optimizer_config_from_json(value, base.optimizer);
      } else if (key == "flags") {
        if (!value.is_object()) throw ParameterError("flags: expected a JSON object");
        for (const auto& [fk, fv] : value.items()) {
          if (fk == "blur") {
            base.flags.blur = fv.get<bool>();
          } else if (fk == "motion_spatial") {
            base.flags.motion_spatial = fv.get<bool>();
          } else if (fk == "spatial_mask_mode") {
            base.flags.spatial_mask_mode = spatial_mask_mode_from_string(fv.get<std::string>());
          } else {
            throw ParameterError("flags: unknown key '" + fk + "'");
          }
        }
      } else if (key == "eval_lengths") {
        base.eval_lengths = value.get<std::vector<double>>();
      } else if (key == "inputs") {
        base.inputs.clear();
        for (const auto& p : value.get<std::vector<std::string>>()) base.inputs.emplace_back(p);
      } else if (key == "output_dir") {
        base.output_dir = value.get<std::string>();
      } else {
        throw ParameterError("config: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw ParameterError("config." + key + ": wrong value type");
    }
  }
  return base;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("GRIDFLOW_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  const std::string s(v);
  if (s.find_first_not_of("0123456789") != std::string::npos) {
    throw ParameterError("GRIDFLOW_SEED must be an unsigned integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    throw ParameterError("GRIDFLOW_SEED out of range: '" + s + "'");
  }
}

}  // namespace gridflow
