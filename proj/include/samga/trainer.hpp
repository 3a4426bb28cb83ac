#pragma once

// Two-stage training loop: coarse stage mixes MMD into the retrieval loss
// under a decaying weight; fine stage freezes the shared encoder, lowers the
// learning rate and optimizes retrieval alone.

#include "samga/checkpoint.hpp"
#include "samga/data.hpp"
#include "samga/evaluator.hpp"
#include "samga/model.hpp"
#include "samga/optim.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace samga {

struct TrainConfig {
  StageSchedule schedule;
  MMDConfig mmd;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int patience = 5;        // evaluations without improvement before stopping; <= 0 disables
  int eval_every = 1;      // epochs between validation evaluations
  bool freeze_shared_in_stage2 = true;
  bool reduce_lr_in_stage2 = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ModelParams<float> model;  // best-validation parameters
  ModelParams<float> last;   // parameters after the final epoch
  TrainProgress progress;
};

// Observes the model after each epoch; `lr` is the rate applied that epoch.
using EpochObserver = std::function<void(const EpochRecord&, const ModelParams<float>&)>;

class Trainer {
 public:
  Trainer(const Dataset& ds, const SplitPlan& split, TrainConfig config, ModelParams<float> init);
  // Continues from a checkpoint taken by `checkpoint()`.
  Trainer(const Dataset& ds, const SplitPlan& split, TrainConfig config, Checkpoint resume_from);

  bool done() const;
  EpochRecord run_epoch();
  TrainResult run(const EpochObserver& observer = nullptr);

  Checkpoint checkpoint() const;
  const ModelParams<float>& params() const { return params_; }
  const TrainProgress& progress() const { return progress_; }

  double learning_rate(int epoch) const;

 private:
  Batch<float> make_batch(const std::vector<int>& trials) const;
  BatchRouting<float> draw_routing(const std::vector<int>& trials, int epoch) const;

  const Dataset& ds_;
  SplitPlan split_;
  TrainConfig config_;
  ModelParams<float> params_;
  OptimizerState<float> opt_;
  std::optional<ModelParams<float>> best_;
  TrainProgress progress_;
  Engine shuffle_;
};

TrainResult train(const Dataset& ds, const SplitPlan& split, const TrainConfig& config,
                  const ModelParams<float>& init, const EpochObserver& observer = nullptr);

// Per-sample dropout stream keyed by (seed, epoch, trial), so routing draws do
// not depend on batch composition or evaluation order.
Engine dropout_stream(std::uint64_t seed, int epoch, int trial);

}  // namespace samga
