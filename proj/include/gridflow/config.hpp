#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gridflow/optimizer.hpp"
#include "gridflow/serialize.hpp"
#include "gridflow/synth.hpp"

namespace gridflow {

/// Ablation axes: blur (B), motion plus spatial consistency (M), and the
/// spatial-mask mode. Applied on top of the optimizer settings.
struct RunFlags {
  bool blur = true;
  bool motion_spatial = true;
  SpatialMaskMode spatial_mask_mode = SpatialMaskMode::kGradientMagnitude;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  // Shared by synth and gridmap; synth.grid is overwritten with it.
  GridConfig grid = SynthConfig{}.grid;
  SynthConfig synth;
  OptimizerConfig optimizer;
  RunFlags flags;
  std::vector<double> eval_lengths = default_eval_lengths();
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir = ".";

  OptimizerConfig effective_optimizer() const;
  SynthConfig effective_synth() const;
  // Throws ParameterError. `need_inputs` is the minimum number of input paths.
  void validate(std::size_t need_inputs = 0) const;
};

Json to_json(const RunConfig& cfg);
/// Keys absent from `j` keep their value from `base`.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});

/// Seed precedence: explicit flag, then GRIDFLOW_SEED, then the config file.
/// Throws ParameterError when the variable is set but not an unsigned integer.
std::optional<std::uint64_t> seed_from_env();

}  // namespace gridflow
