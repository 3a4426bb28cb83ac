#pragma once

#include "samga/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace samga {

using SubjectId = int;
using ConceptId = int;
using ImageId = int;
using CategoryId = int;

enum class Split : std::uint8_t { train, val, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrialLabel {
  SubjectId subject = 0;
  ConceptId concept_id = 0;
  ImageId image = 0;
  CategoryId category = 0;
  Split split = Split::train;
};

// One trial: a [channels x time] signal (stored flattened, channel-major)
// plus its labels.
struct EEGTrial {
  Eigen::Map<const RowVec<float>> signal;
  int channels;
  int time_samples;
  TrialLabel label;
};

struct LayerSpec {
  int layer_id = 0;
  int dim = 0;
};

// Per-image bank of K layer features.
struct VisualFeatureStack {
  ImageId image = 0;
  std::vector<int> layer_ids;
  std::vector<Vec<float>> h;
};

struct PlantedTruth {
  std::vector<double> global_depth_logits;                    // [K]
  std::vector<std::vector<double>> subject_deviation_logits;  // [S][K]
  std::vector<std::vector<double>> category_depth_logits;     // [G][K], may be empty

  // Depth weights actually used to synthesize subject s (and category g when
  // category-dependent depth is configured).
  Vec<double> depth_weights(SubjectId s, CategoryId g = 0) const;
};

struct DatasetManifest {
  int version = 1;
  int S = 0;
  int P = 0;
  int images_per_concept = 0;
  int C = 0;
  int Tt = 0;
  std::vector<LayerSpec> layers;
  std::map<ConceptId, CategoryId> categories;
  std::map<std::string, std::string> files;       // logical name -> relative path
  std::map<std::string, std::uint32_t> checksums;  // logical name -> crc32
  std::optional<PlantedTruth> planted_truth;

  int K() const { return static_cast<int>(layers.size()); }
  int num_images() const { return P * images_per_concept; }
  int signal_dim() const { return C * Tt; }
  int num_categories() const;
};

// Immutable after construction; safe for concurrent reads.
struct Dataset {
  DatasetManifest manifest;
  MatF eeg;                     // [N x C*Tt]
  std::vector<MatF> features;   // K entries of [N_img x d_k]
  std::vector<TrialLabel> labels;

  int num_trials() const { return static_cast<int>(labels.size()); }
  EEGTrial trial(int n) const;
  VisualFeatureStack feature_stack(ImageId image) const;
  ConceptId concept_of_image(ImageId image) const { return image / manifest.images_per_concept; }
};

struct SynthConfig {
  int subjects = 5;
  int concepts = 60;
  int images_per_concept = 4;
  int trials_per_image = 8;
  int channels = 8;
  int time_samples = 32;
  std::vector<int> layer_ids{20, 24, 28, 32, 36};
  std::vector<int> layer_dims{16, 16, 16, 16, 16};
  int latent_dim = 8;
  int categories = 5;
  double test_fraction = 0.2;
  double val_fraction = 0.1;
  double eeg_noise = 0.5;
  // Fraction of each layer's variance carried by the concept latent; the rest
  // is image-specific structure. Increases with depth.
  std::vector<double> concept_signal{0.2, 0.35, 0.5, 0.65, 0.8};
  std::vector<double> global_depth_logits{-1.0, 0.0, 0.5, 2.0, 0.0};
  // Explicit per-subject deviation logits [S][K]; when empty they are drawn
  // as N(0, subject_deviation_scale^2) and centered across subjects.
  std::vector<std::vector<double>> subject_deviation_logits;
  double subject_deviation_scale = 1.0;
  std::vector<std::vector<double>> category_depth_logits;  // optional [G][K]
  double subject_mixing_spread = 0.5;
  double category_strength = 1.0;

  void validate() const;
};

struct GeneratedData {
  Dataset dataset;
  // Per-concept latent codes, exposed for oracles.
  MatD concept_latents;
};

GeneratedData generate_synthetic(const SynthConfig& config, std::uint64_t seed);

// Writes manifest.json, eeg.bin, feat_layer_<id>.bin and labels.csv.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest_path);

struct ConceptPartition {
  std::vector<ConceptId> train, val, test;
};

ConceptPartition partition_concepts(int concepts, double test_fraction, double val_fraction,
                                    std::uint64_t seed);

enum class SplitMode { intra_subject, leave_one_subject_out };

struct SplitPlan {
  SplitMode mode = SplitMode::intra_subject;
  SubjectId subject = 0;  // the trained subject (intra) or the held-out one (loso)
  std::vector<int> train, val, test;  // trial indices
  std::vector<ImageId> val_images, test_images;  // retrieval candidates
};

// Trial lists honor the dataset's zero-shot concept partition.
SplitPlan make_split(const Dataset& dataset, SplitMode mode, SubjectId subject);

std::string to_string(SplitMode mode);
SplitMode split_mode_from_string(const std::string& name);

}  // namespace samga
