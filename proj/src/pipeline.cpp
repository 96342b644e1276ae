#include "gridflow/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <thread>

#include "gridflow/warp.hpp"

namespace gridflow {

ValidSet evaluation_mask(const GridMap& map1, const FlowField& gt_flow) {
  return valid_set(occupancy(map1), gt_flow);
}

PairEvaluation evaluate_pair(const Scenario& scenario, int pair, const OptimizerConfig& cfg) {
  const auto& grid = scenario.config.grid;
  const GridMap map1 = build_grid_map(render_frame(scenario, pair, scenario.config.noise_sigma_m), grid);
  const GridMap map2 = build_grid_map(render_frame(scenario, pair + 1, scenario.config.noise_sigma_m), grid);
  const GroundTruth gt = ground_truth_flow(scenario, pair, grid);

  const FlowResult result = estimate_flow_pair(map1, map2, cfg);
  PairEvaluation ev;
  ev.seed = scenario.seed;
  ev.pair = pair;
  ev.epe = endpoint_error(result.flow_fw, gt.flow, evaluation_mask(map1, gt.flow));
  ev.estimated = result.transform_fw;
  ev.truth = gt.transform_fw;
  ev.translation_error_cells = std::sqrt((result.transform_fw.t - gt.transform_fw.t).squared_norm());
  ev.rotation_error_rad = std::abs(wrap_angle(result.transform_fw.theta - gt.transform_fw.theta));
  ev.iou = object_prediction_iou(result.flow_fw, gt.boxes1, gt.boxes2, map1);
  return ev;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

SuiteSummary run_suite(const std::vector<Scenario>& scenarios, const OptimizerConfig& cfg, int jobs) {
  SuiteSummary s;
  s.pairs.resize(scenarios.size());
  parallel_for(scenarios.size(), jobs, [&](std::size_t i) { s.pairs[i] = evaluate_pair(scenarios[i], 0, cfg); });

  if (s.pairs.empty()) return s;
  double iou_sum = 0.0;
  for (const auto& p : s.pairs) {
    s.mean_epe += p.epe.mean;
    s.max_epe = std::max(s.max_epe, p.epe.mean);
    s.mean_translation_error += p.translation_error_cells;
    s.max_translation_error = std::max(s.max_translation_error, p.translation_error_cells);
    s.mean_rotation_error += p.rotation_error_rad;
    for (const auto& o : p.iou.objects) {
      iou_sum += o.iou;
      ++s.iou_objects;
    }
  }
  const double n_pairs = static_cast<double>(s.pairs.size());
  s.mean_epe /= n_pairs;
  s.mean_translation_error /= n_pairs;
  s.mean_rotation_error /= n_pairs;
  if (s.iou_objects > 0) s.mean_iou = iou_sum / s.iou_objects;
  return s;
}

SynthConfig suite_synth_config() {
  SynthConfig cfg;
  cfg.frames = 2;
  return cfg;
}

std::vector<Scenario> make_suite(std::uint64_t base_seed, int count, const SynthConfig& cfg) {
  std::vector<Scenario> out;
  for (int i = 0; i < count; ++i) out.push_back(generate_scenario(base_seed + static_cast<std::uint64_t>(i), cfg));
  return out;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"B-/M-", false, false}, {"B+/M-", true, false}, {"B+/M+", true, true}};
}

OptimizerConfig apply_variant(OptimizerConfig cfg, const AblationVariant& v) {
  if (!v.blur) cfg.sigma_schedule = {0.0};
  if (!v.motion_spatial) {
    cfg.weights.motion = 0.0;
    cfg.weights.spatial = 0.0;
  }
  return cfg;
}

std::vector<AblationRow> run_ablation(const std::vector<Scenario>& scenarios, const OptimizerConfig& base, int jobs) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants()) rows.push_back({v, run_suite(scenarios, apply_variant(base, v), jobs)});
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-3s %-2s %-2s  %12s  %12s  %14s  %14s  %8s\n", "Id", "B", "M", "mean EPE", "max EPE",
                "t err (cells)", "r err (mrad)", "IoU %");
  out += buf;
  int id = 1;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-3d %-2s %-2s  %12.4f  %12.4f  %14.4f  %14.4f  %8.2f\n", id++,
                  r.variant.blur ? "y" : "n", r.variant.motion_spatial ? "y" : "n", r.summary.mean_epe,
                  r.summary.max_epe, r.summary.mean_translation_error, 1e3 * r.summary.mean_rotation_error,
                  100.0 * r.summary.mean_iou);
    out += buf;
  }
  return out;
}

}  // namespace gridflow
