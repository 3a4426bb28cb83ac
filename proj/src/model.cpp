#include "samga/model.hpp"

namespace samga {

std::string to_string(ProjectorKind kind) {
  switch (kind) {
    case ProjectorKind::direct: return "direct";
    case ProjectorKind::linear: return "linear";
    case ProjectorKind::mlp: return "mlp";
  }
  return "linear";
}

ProjectorKind projector_from_string(const std::string& name) {
  if (name == "direct") return ProjectorKind::direct;
  if (name == "linear") return ProjectorKind::linear;
  if (name == "mlp") return ProjectorKind::mlp;
  throw std::invalid_argument("unknown projector '" + name + "' (expected direct|linear|mlp)");
}

void ModelSpec::validate() const {
  if (subjects <= 0) throw std::invalid_argument("model needs at least one subject");
  if (layer_dims.empty()) throw std::invalid_argument("model needs at least one visual layer");
  for (int d : layer_dims) {
    if (d <= 0) throw std::invalid_argument("layer dimensions must be positive");
  }
  if (signal_dim <= 0) throw std::invalid_argument("EEG signal dimension must be positive");
  if (d_common <= 0) throw std::invalid_argument("model.d_common must be positive");
  if (d_z <= 0) throw std::invalid_argument("model.d_z must be positive");
  if (eeg_hidden_dim < 0) throw std::invalid_argument("model.eeg_hidden_dim must be non-negative");
}

}  // namespace samga
