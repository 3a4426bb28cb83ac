#pragma once

// End-to-end runs and the ablation harness (fusion mechanism, stage
// strategy, projector design) plus per-layer category accuracy.

#include "samga/config.hpp"
#include "samga/evaluator.hpp"
#include "samga/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace samga {

struct Variant {
  enum class Kind {
    learned,
    uniform,
    single_layer,
    single_best,
    one_stage,
    no_stage_lr,
    no_freeze,
    projector_direct,
    projector_linear,
    projector_mlp,
  };
  Kind kind = Kind::learned;
  int layer_id = -1;  // single_layer only

  std::string name() const;
};

// Accepts the names listed by `variant_names()`; `single_layer:<layer_id>`
// selects one visual layer by its id.
Variant parse_variant(const std::string& name);
std::string variant_names();

// Config for one variant; throws ConfigError for a layer id the dataset lacks.
RunConfig apply_variant(RunConfig cfg, const Variant& v, const DatasetManifest& manifest);

struct RunOutcome {
  TrainResult training;
  RetrievalResult test;
  std::vector<double> category_top1;
};

// Train from the config's seed and evaluate on the split's test trials.
RunOutcome run_pipeline(const Dataset& ds, const SplitPlan& split, const RunConfig& cfg,
                        const EpochObserver& observer = nullptr);

struct AblationRow {
  std::string variant;
  int n_seeds = 0;
  double top1_mean = 0, top1_sd = 0, top5_mean = 0, top5_sd = 0;
  std::vector<double> top1_per_seed, top5_per_seed;
  int best_layer_id = -1;  // single_best only
};

struct MeanSd {
  double mean = 0, sd = 0;
};
MeanSd mean_sd(const std::vector<double>& xs);

// Per-seed outcomes of single-layer runs, indexed [layer][seed].
struct LayerSweep {
  std::vector<int> layer_ids;
  std::vector<std::vector<RunOutcome>> runs;
};

LayerSweep sweep_single_layers(const Dataset& ds, const SplitPlan& split, const RunConfig& cfg,
                               const std::vector<std::uint64_t>& seeds);

AblationRow summarize(const std::string& variant, const std::vector<RunOutcome>& runs);
AblationRow single_best_row(const LayerSweep& sweep);

// For `single_best`, reuses `sweep` when provided, otherwise runs it.
AblationRow run_ablation(const Dataset& ds, const SplitPlan& split, const Variant& v, const RunConfig& cfg,
                         const std::vector<std::uint64_t>& seeds, const LayerSweep* sweep = nullptr);

// Mean Top-1 per [category][layer] over seeds.
MatD layerwise_category_accuracy(const LayerSweep& sweep, int n_categories);

}  // namespace samga
