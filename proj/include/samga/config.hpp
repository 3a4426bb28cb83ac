#pragma once

// Run configuration: one JSON document with namespaced sections
// (data, router, model, loss, train, eval) plus `seed` and `out_dir`.

#include "samga/data.hpp"
#include "samga/model.hpp"
#include "samga/objectives.hpp"
#include "samga/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace samga {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSettings {
  int d_common = 32;
  int d_z = 0;  // 0: same as d_common
  int eeg_hidden_dim = 0;
  ProjectorKind projector = ProjectorKind::linear;
};

struct LossSettings {
  double lambda0 = 0.5;
  int t_c = 20;
  std::vector<double> mmd_multipliers{0.25, 0.5, 1.0, 2.0, 4.0};
  double tau_init = 0.07;
  LambdaSchedule lambda_schedule = LambdaSchedule::linear;
};

struct TrainSettings {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double stage2_lr_multiplier = 0.1;
  int patience = 5;
  int eval_every = 1;
  bool freeze_shared = true;
  bool stage_lr = true;
  SplitMode split_mode = SplitMode::intra_subject;
  int subject = 0;
};

struct EvalSettings {
  std::vector<int> k{1, 5};
};

struct RunConfig {
  SynthConfig data;
  RouterSettings router;
  ModelSettings model;
  LossSettings loss;
  TrainSettings train;
  EvalSettings eval;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
};

// Fully resolved configuration as JSON (every key present).
nlohmann::json to_json(const RunConfig& cfg);

// Merges `j` over the defaults. Unknown keys and type errors throw
// ConfigError naming the key.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Applies a `section.key=value` override; value is parsed as JSON when
// possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

ModelSpec make_model_spec(const RunConfig& cfg, const DatasetManifest& manifest);
TrainConfig make_train_config(const RunConfig& cfg);

// Fresh model for a run, initialized from the run seed.
ModelParams<float> make_initial_model(const RunConfig& cfg, const DatasetManifest& manifest);

}  // namespace samga
