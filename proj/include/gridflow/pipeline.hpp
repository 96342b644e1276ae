#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gridflow/eval.hpp"
#include "gridflow/optimizer.hpp"
#include "gridflow/synth.hpp"

namespace gridflow {

/// Outcome of estimating one synthetic frame pair against its ground truth.
struct PairEvaluation {
  std::uint64_t seed = 0;
  int pair = 0;
  EpeStats epe;
  double translation_error_cells = 0.0;
  double rotation_error_rad = 0.0;
  IouReport iou;
  RigidTransform2D estimated;  // 2<-1, centered cells
  RigidTransform2D truth;
};

struct SuiteSummary {
  std::vector<PairEvaluation> pairs;
  double mean_epe = 0.0;
  double max_epe = 0.0;
  double mean_translation_error = 0.0;
  double max_translation_error = 0.0;
  double mean_rotation_error = 0.0;
  double mean_iou = 0.0;
  int iou_objects = 0;
};

/// Cells occupied in frame 1 whose true mapped coordinate stays in bounds.
ValidSet evaluation_mask(const GridMap& map1, const FlowField& gt_flow);

PairEvaluation evaluate_pair(const Scenario& scenario, int pair, const OptimizerConfig& cfg);

/// Calls fn(0..count-1) on up to `jobs` threads. The first exception is
/// rethrown after all workers stop.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

/// Runs every scenario's first pair; `jobs` > 1 evaluates scenarios concurrently.
SuiteSummary run_suite(const std::vector<Scenario>& scenarios, const OptimizerConfig& cfg, int jobs = 1);

/// The fixed desk-scale scenario suite: `count` scenarios seeded base_seed, base_seed + 1, ...
SynthConfig suite_synth_config();
std::vector<Scenario> make_suite(std::uint64_t base_seed, int count, const SynthConfig& cfg);

/// Configuration axes of the ablation: Gaussian blur (B) and the motion plus
/// spatial consistency terms (M).
struct AblationVariant {
  std::string name;
  bool blur = true;
  bool motion_spatial = true;
};

std::vector<AblationVariant> ablation_variants();
OptimizerConfig apply_variant(OptimizerConfig cfg, const AblationVariant& v);

struct AblationRow {
  AblationVariant variant;
  SuiteSummary summary;
};

std::vector<AblationRow> run_ablation(const std::vector<Scenario>& scenarios, const OptimizerConfig& base, int jobs = 1);
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace gridflow
