#pragma once

#include "samga/model.hpp"
#include "samga/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace samga {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  int epoch = 0;
  int stage = 1;
  double lambda = 0.0;
  double lr = 0.0;
  double loss_ret = 0.0;
  double loss_mmd = 0.0;
  double loss_total = 0.0;
  std::optional<double> val_top1;
  int batches = 0;
  int skipped_batches = 0;
};

nlohmann::json record_to_json(const EpochRecord& r);

struct TrainProgress {
  int epochs_done = 0;
  double best_val_top1 = -1.0;
  int best_epoch = 0;
  int evals_since_best = 0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
};

// Everything needed to resume training bit-for-bit.
struct Checkpoint {
  ModelParams<float> params;
  OptimizerState<float> optimizer;
  std::optional<ModelParams<float>> best;
  TrainProgress progress;
  std::vector<std::uint64_t> rng_state;  // shuffle engine
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Versioned little-endian binary (float32 blocks, 64-bit counters) plus a
// `<path>.json` sidecar listing block names and shapes.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// When `expected` is given, the stored model must have the same structure.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelSpec* expected = nullptr);

}  // namespace samga
