#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "gridflow/eval.hpp"
#include "gridflow/grid_map.hpp"
#include "gridflow/losses.hpp"
#include "gridflow/optimizer.hpp"
#include "gridflow/pipeline.hpp"
#include "gridflow/rigid_transform.hpp"
#include "gridflow/synth.hpp"

namespace gridflow {

// Insertion-ordered so that emitted files keep a stable, readable key order.
using Json = nlohmann::ordered_json;

// Parsers start from `base` and override only the keys present. Unknown keys
// and mistyped values throw ParameterError naming the key.
Json to_json(const GridConfig& cfg);
GridConfig grid_config_from_json(const Json& j, GridConfig base = {});

Json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const Json& j, SynthConfig base = {});

/// Flat key set; loss weights appear as weight_data, weight_motion, ...
Json to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base = {});

const char* to_string(StencilMode mode);
StencilMode stencil_mode_from_string(const std::string& s);
const char* to_string(SpatialMaskMode mode);
SpatialMaskMode spatial_mask_mode_from_string(const std::string& s);

Json to_json(const RigidTransform2D& t);
Json to_json(const TermValue& t);
Json to_json(const LossBreakdown& b);

/// Poses, object specs and seed; the background is regenerated from seed and config.
Json to_json(const Scenario& s);

Json to_json(const Box& b);
Json to_json(const std::vector<ObjectBox>& boxes);
std::vector<ObjectBox> boxes_from_json(const Json& j);

Json to_json(const EpeStats& e);
Json to_json(const OdometryMetrics& m);
Json to_json(const IouReport& r);
Json to_json(const PairEvaluation& p);
Json to_json(const SuiteSummary& s);
Json to_json(const std::vector<AblationRow>& rows);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace gridflow
