#pragma once

#include "samga/encoders.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace samga {

// Tiny random model and batch, evaluated in 64-bit, comparing analytic
// gradients with central differences block by block.
struct GradcheckConfig {
  int subjects = 2;
  int layers = 3;
  int layer_dim = 3;
  int signal_dim = 5;
  int d_common = 3;
  int d_z = 3;
  int eeg_hidden_dim = 0;
  ProjectorKind projector = ProjectorKind::linear;
  int batch = 4;
  double lambda = 0.5;  // 0 checks the pure retrieval objective
  double tau_init = 0.5;
  bool freeze_shared = false;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  std::string corrupt_block;  // test hook: perturb this block's analytic gradient
};

enum class BlockStatus { pass, fail, skipped };

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
  BlockStatus status = BlockStatus::pass;
};

struct GradcheckReport {
  std::vector<BlockCheck> blocks;
  bool passed() const;
};

GradcheckReport gradcheck(const GradcheckConfig& config);

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_error(double analytic, double numeric);

}  // namespace samga
