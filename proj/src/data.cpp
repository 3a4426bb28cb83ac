#include "samga/data.hpp"

#include "samga/rng.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace samga {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary arrays are written in host order and must be little-endian");

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split label '" + name + "'");
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::intra_subject ? "intra" : "loso";
}

SplitMode split_mode_from_string(const std::string& name) {
  if (name == "intra" || name == "intra_subject") return SplitMode::intra_subject;
  if (name == "loso" || name == "leave_one_subject_out") return SplitMode::leave_one_subject_out;
  throw DataError("unknown split mode '" + name + "' (expected intra|loso)");
}

Vec<double> PlantedTruth::depth_weights(SubjectId s, CategoryId g) const {
  const auto K = static_cast<Eigen::Index>(global_depth_logits.size());
  Vec<double> logits(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    logits[k] = global_depth_logits[k] + subject_deviation_logits.at(s)[k];
    if (!category_depth_logits.empty()) logits[k] += category_depth_logits.at(g)[k];
  }
  return softmax<double>(logits);
}

int DatasetManifest::num_categories() const {
  int g = 0;
  for (const auto& [p, c] : categories) g = std::max(g, c + 1);
  return g;
}

EEGTrial Dataset::trial(int n) const {
  return EEGTrial{Eigen::Map<const RowVec<float>>(eeg.row(n).data(), eeg.cols()), manifest.C,
                  manifest.Tt, labels.at(n)};
}

VisualFeatureStack Dataset::feature_stack(ImageId image) const {
  VisualFeatureStack stack;
  stack.image = image;
  for (std::size_t k = 0; k < features.size(); ++k) {
    stack.layer_ids.push_back(manifest.layers[k].layer_id);
    stack.h.push_back(features[k].row(image).transpose());
  }
  return stack;
}

void SynthConfig::validate() const {
  auto positive = [](int v, const char* key) {
    if (v <= 0) throw DataError(std::string("data.") + key + " must be positive");
  };
  positive(subjects, "subjects");
  positive(concepts, "concepts");
  positive(images_per_concept, "images_per_concept");
  positive(trials_per_image, "trials_per_image");
  positive(channels, "channels");
  positive(time_samples, "time_samples");
  positive(latent_dim, "latent_dim");
  positive(categories, "categories");
  const auto K = layer_ids.size();
  if (K == 0) throw DataError("data.layer_ids must name at least one layer (K > 0)");
  if (layer_dims.size() != K) throw DataError("data.layer_dims length differs from K");
  for (int d : layer_dims) positive(d, "layer_dims");
  if (std::adjacent_find(layer_dims.begin(), layer_dims.end(), std::not_equal_to<>()) !=
      layer_dims.end()) {
    throw DataError("data.layer_dims must be equal across layers for the EEG mixing model");
  }
  if (global_depth_logits.size() != K) {
    throw DataError("data.global_depth_logits length " + std::to_string(global_depth_logits.size()) +
                    " inconsistent with K = " + std::to_string(K));
  }
  if (concept_signal.size() != K) throw DataError("data.concept_signal length inconsistent with K");
  for (double r : concept_signal) {
    if (!(r >= 0.0 && r < 1.0)) throw DataError("data.concept_signal entries must lie in [0, 1)");
  }
  if (!subject_deviation_logits.empty()) {
    if (static_cast<int>(subject_deviation_logits.size()) != subjects) {
      throw DataError("data.subject_deviation_logits must have one row per subject");
    }
    for (const auto& row : subject_deviation_logits) {
      if (row.size() != K) throw DataError("data.subject_deviation_logits row length inconsistent with K");
    }
  }
  if (!category_depth_logits.empty()) {
    if (static_cast<int>(category_depth_logits.size()) != categories) {
      throw DataError("data.category_depth_logits must have one row per category");
    }
    for (const auto& row : category_depth_logits) {
      if (row.size() != K) throw DataError("data.category_depth_logits row length inconsistent with K");
    }
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("data.test_fraction must lie in (0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw DataError("data.val_fraction must lie in [0, 1)");
  if (eeg_noise < 0.0) throw DataError("data.eeg_noise must be non-negative");
  if (subject_mixing_spread < 0.0) throw DataError("data.subject_mixing_spread must be non-negative");
}

ConceptPartition partition_concepts(int concepts, double test_fraction, double val_fraction,
                                    std::uint64_t seed) {
  const int n_test = static_cast<int>(std::lround(concepts * test_fraction));
  if (n_test < 1 || n_test >= concepts) {
    throw DataError("cannot hold out " + std::to_string(n_test) + " test concepts from " +
                    std::to_string(concepts));
  }
  const int remaining = concepts - n_test;
  int n_val = val_fraction > 0.0 ? std::max(1, static_cast<int>(std::lround(remaining * val_fraction))) : 0;
  if (n_val >= remaining) {
    throw DataError("too few concepts for a train partition after " + std::to_string(n_test) +
                    " test and " + std::to_string(n_val) + " validation concepts");
  }
  std::vector<ConceptId> order(concepts);
  std::iota(order.begin(), order.end(), 0);
  Engine engine = make_engine(seed, "split");
  std::shuffle(order.begin(), order.end(), engine);

  ConceptPartition part;
  part.test.assign(order.begin(), order.begin() + n_test);
  part.val.assign(order.begin() + n_test, order.begin() + n_test + n_val);
  part.train.assign(order.begin() + n_test + n_val, order.end());
  std::sort(part.test.begin(), part.test.end());
  std::sort(part.val.begin(), part.val.end());
  std::sort(part.train.begin(), part.train.end());
  return part;
}

GeneratedData generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const int S = config.subjects;
  const int P = config.concepts;
  const int K = static_cast<int>(config.layer_ids.size());
  const int G = config.categories;
  const int d = config.latent_dim;
  const int dk = config.layer_dims.front();
  const int signal_dim = config.channels * config.time_samples;
  const int n_img = P * config.images_per_concept;

  Engine engine = make_engine(seed, "data");
  auto normal_matrix = [&](int rows, int cols, double scale) {
    MatD m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * gaussian<double>(engine);
    return m;
  };

  // Planted depth preference.
  PlantedTruth truth;
  truth.global_depth_logits = config.global_depth_logits;
  if (!config.subject_deviation_logits.empty()) {
    truth.subject_deviation_logits = config.subject_deviation_logits;
  } else {
    MatD dev = normal_matrix(S, K, config.subject_deviation_scale);
    if (S > 1) dev.rowwise() -= dev.colwise().mean();
    truth.subject_deviation_logits.assign(S, std::vector<double>(K));
    for (int s = 0; s < S; ++s)
      for (int k = 0; k < K; ++k) truth.subject_deviation_logits[s][k] = dev(s, k);
  }
  truth.category_depth_logits = config.category_depth_logits;

  // Concept latents with category structure; categories assigned round-robin.
  MatD category_means = normal_matrix(G, d, 1.0);
  MatD latents = normal_matrix(P, d, 1.0);
  for (int p = 0; p < P; ++p) latents.row(p) += config.category_strength * category_means.row(p % G);

  // Layer features: concept signal through a layer map plus image structure.
  std::vector<MatD> layer_maps;
  for (int k = 0; k < K; ++k) layer_maps.push_back(normal_matrix(dk, d, 1.0 / std::sqrt(static_cast<double>(d))));
  std::vector<MatD> feats(K, MatD(n_img, dk));
  for (int k = 0; k < K; ++k) {
    const double rho = config.concept_signal[k];
    const double latent_scale = std::sqrt(1.0 + config.category_strength * config.category_strength);
    for (int i = 0; i < n_img; ++i) {
      const int p = i / config.images_per_concept;
      Vec<double> structure(dk);
      for (int j = 0; j < dk; ++j) structure[j] = gaussian<double>(engine);
      feats[k].row(i) = (std::sqrt(rho) / latent_scale * (layer_maps[k] * latents.row(p).transpose()) +
                         std::sqrt(1.0 - rho) * structure)
                            .transpose();
    }
  }

  // Subject mixing: shared component plus a subject-specific perturbation.
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  MatD shared_mix = normal_matrix(signal_dim, dk, mix_scale);
  std::vector<MatD> mixing;
  for (int s = 0; s < S; ++s) mixing.push_back(shared_mix + normal_matrix(signal_dim, dk, mix_scale * config.subject_mixing_spread));

  const ConceptPartition part =
      partition_concepts(P, config.test_fraction, config.val_fraction, seed);
  std::vector<Split> concept_split(P, Split::train);
  for (ConceptId p : part.val) concept_split[p] = Split::val;
  for (ConceptId p : part.test) concept_split[p] = Split::test;

  GeneratedData out;
  Dataset& ds = out.dataset;
  const int n_trials = S * n_img * config.trials_per_image;
  ds.eeg.resize(n_trials, signal_dim);
  ds.labels.reserve(n_trials);
  int n = 0;
  for (int s = 0; s < S; ++s) {
    std::vector<Vec<double>> beta_by_category;
    for (int g = 0; g < G; ++g) beta_by_category.push_back(truth.depth_weights(s, g));
    for (int i = 0; i < n_img; ++i) {
      const int p = i / config.images_per_concept;
      const Vec<double>& beta = beta_by_category[p % G];
      Vec<double> mixed = Vec<double>::Zero(dk);
      for (int k = 0; k < K; ++k) mixed += beta[k] * feats[k].row(i).transpose();
      const Vec<double> clean = mixing[s] * mixed;
      for (int r = 0; r < config.trials_per_image; ++r, ++n) {
        for (int j = 0; j < signal_dim; ++j) {
          const double noise = config.eeg_noise > 0.0 ? config.eeg_noise * gaussian<double>(engine) : 0.0;
          ds.eeg(n, j) = static_cast<float>(clean[j] + noise);
        }
        ds.labels.push_back(TrialLabel{s, p, i, p % G, concept_split[p]});
      }
    }
  }
  for (int k = 0; k < K; ++k) ds.features.push_back(feats[k].cast<float>());

  DatasetManifest& m = ds.manifest;
  m.S = S;
  m.P = P;
  m.images_per_concept = config.images_per_concept;
  m.C = config.channels;
  m.Tt = config.time_samples;
  for (int k = 0; k < K; ++k) m.layers.push_back({config.layer_ids[k], config.layer_dims[k]});
  for (int p = 0; p < P; ++p) m.categories[p] = p % G;
  m.planted_truth = truth;
  out.concept_latents = latents;
  return out;
}

// --- on-disk format ---------------------------------------------------------

namespace {

std::uint32_t crc_of(const float* data, std::size_t count) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(count * sizeof(float))));
}

void write_floats(const fs::path& path, const MatF& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!os) throw DataError("failed writing " + path.string());
}

MatF read_floats(const fs::path& path, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (!fs::exists(path)) throw DataError("missing file for array '" + name + "': " + path.string());
  const auto expected = static_cast<std::uintmax_t>(rows * cols) * sizeof(float);
  const auto actual = fs::file_size(path);
  if (actual != expected) {
    std::ostringstream msg;
    if (rows > 0 && actual % (static_cast<std::uintmax_t>(rows) * sizeof(float)) == 0) {
      msg << "dimension mismatch in array '" << name << "' (" << path.string() << "): file holds "
          << actual / (rows * sizeof(float)) << " floats per row, manifest expects " << cols
          << " (expected " << expected << " bytes, found " << actual << ")";
    } else {
      msg << "array '" << name << "' (" << path.string() << ") has " << actual
          << " bytes, expected " << expected << " bytes";
    }
    throw DataError(msg.str());
  }
  MatF m(rows, cols);
  std::ifstream is(path, std::ios::binary);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(expected));
  if (!is) throw DataError("failed reading " + path.string());
  if (!m.allFinite()) throw DataError("non-finite values in array '" + name + "'");
  return m;
}

json truth_to_json(const PlantedTruth& t) {
  json j;
  j["global_depth_logits"] = t.global_depth_logits;
  j["subject_deviation_logits"] = t.subject_deviation_logits;
  if (!t.category_depth_logits.empty()) j["category_depth_logits"] = t.category_depth_logits;
  return j;
}

std::string feature_file_key(int layer_id) { return "feat_layer_" + std::to_string(layer_id); }

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  DatasetManifest m = ds.manifest;
  m.files.clear();
  m.checksums.clear();

  write_floats(dir / "eeg.bin", ds.eeg);
  m.files["eeg"] = "eeg.bin";
  m.checksums["eeg"] = crc_of(ds.eeg.data(), ds.eeg.size());
  for (std::size_t k = 0; k < ds.features.size(); ++k) {
    const std::string key = feature_file_key(m.layers[k].layer_id);
    write_floats(dir / (key + ".bin"), ds.features[k]);
    m.files[key] = key + ".bin";
    m.checksums[key] = crc_of(ds.features[k].data(), ds.features[k].size());
  }

  {
    std::ofstream os(dir / "labels.csv", std::ios::trunc);
    if (!os) throw DataError("cannot open labels.csv for writing");
    os << "trial,subject,concept,image,category,split\n";
    for (std::size_t n = 0; n < ds.labels.size(); ++n) {
      const auto& l = ds.labels[n];
      os << n << ',' << l.subject << ',' << l.concept_id << ',' << l.image << ',' << l.category << ','
         << to_string(l.split) << '\n';
    }
  }
  m.files["labels"] = "labels.csv";

  json j;
  j["version"] = m.version;
  j["S"] = m.S;
  j["P"] = m.P;
  j["images_per_concept"] = m.images_per_concept;
  j["C"] = m.C;
  j["Tt"] = m.Tt;
  j["layers"] = json::array();
  for (const auto& l : m.layers) j["layers"].push_back({{"layer_id", l.layer_id}, {"d_k", l.dim}});
  json cats = json::object();
  for (const auto& [p, g] : m.categories) cats[std::to_string(p)] = g;
  j["categories"] = cats;
  j["files"] = m.files;
  j["checksums"] = m.checksums;
  if (m.planted_truth) j["planted_truth"] = truth_to_json(*m.planted_truth);

  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw DataError("cannot open manifest.json for writing");
  os << j.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw DataError("cannot open manifest " + manifest_path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const fs::path dir = manifest_path.parent_path();

  Dataset ds;
  DatasetManifest& m = ds.manifest;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw DataError("unsupported manifest version " + std::to_string(m.version));
    m.S = j.at("S").get<int>();
    m.P = j.at("P").get<int>();
    m.images_per_concept = j.at("images_per_concept").get<int>();
    m.C = j.at("C").get<int>();
    m.Tt = j.at("Tt").get<int>();
    for (const auto& l : j.at("layers")) m.layers.push_back({l.at("layer_id").get<int>(), l.at("d_k").get<int>()});
    for (const auto& [key, val] : j.at("categories").items()) m.categories[std::stoi(key)] = val.get<int>();
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    if (j.contains("checksums")) m.checksums = j.at("checksums").get<std::map<std::string, std::uint32_t>>();
    if (j.contains("planted_truth")) {
      const auto& t = j.at("planted_truth");
      PlantedTruth truth;
      truth.global_depth_logits = t.at("global_depth_logits").get<std::vector<double>>();
      truth.subject_deviation_logits = t.at("subject_deviation_logits").get<std::vector<std::vector<double>>>();
      if (t.contains("category_depth_logits"))
        truth.category_depth_logits = t.at("category_depth_logits").get<std::vector<std::vector<double>>>();
      m.planted_truth = truth;
    }
  } catch (const json::exception& e) {
    throw DataError("invalid manifest field: " + std::string(e.what()));
  }
  if (m.S <= 0 || m.P <= 0 || m.images_per_concept <= 0 || m.C <= 0 || m.Tt <= 0 || m.layers.empty()) {
    throw DataError("manifest dimensions must be positive");
  }

  auto file_of = [&](const std::string& key) {
    auto it = m.files.find(key);
    if (it == m.files.end()) throw DataError("manifest lists no file for array '" + key + "'");
    return dir / it->second;
  };

  {
    const fs::path labels_path = file_of("labels");
    std::ifstream ls(labels_path);
    if (!ls) throw DataError("missing file for array 'labels': " + labels_path.string());
    std::string line;
    std::getline(ls, line);
    if (line != "trial,subject,concept,image,category,split") {
      throw DataError("labels.csv has unexpected header '" + line + "'");
    }
    while (std::getline(ls, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(row, cell, ',')) cells.push_back(cell);
      if (cells.size() != 6) throw DataError("labels.csv: malformed row '" + line + "'");
      TrialLabel l{std::stoi(cells[1]), std::stoi(cells[2]), std::stoi(cells[3]), std::stoi(cells[4]),
                   split_from_string(cells[5])};
      if (std::stoi(cells[0]) != static_cast<int>(ds.labels.size())) {
        throw DataError("labels.csv: trial indices must be 0..N-1 in order");
      }
      if (l.subject < 0 || l.subject >= m.S || l.image < 0 || l.image >= m.num_images() ||
          l.concept_id != l.image / m.images_per_concept) {
        throw DataError("labels.csv: inconsistent labels at trial " + cells[0]);
      }
      ds.labels.push_back(l);
    }
  }

  ds.eeg = read_floats(file_of("eeg"), "eeg", static_cast<Eigen::Index>(ds.labels.size()), m.signal_dim());
  for (const auto& layer : m.layers) {
    const std::string key = feature_file_key(layer.layer_id);
    ds.features.push_back(read_floats(file_of(key), key, m.num_images(), layer.dim));
  }

  auto verify = [&](const std::string& key, const MatF& arr) {
    auto it = m.checksums.find(key);
    if (it != m.checksums.end() && it->second != crc_of(arr.data(), arr.size())) {
      throw DataError("checksum mismatch for array '" + key + "'");
    }
  };
  verify("eeg", ds.eeg);
  for (std::size_t k = 0; k < m.layers.size(); ++k) verify(feature_file_key(m.layers[k].layer_id), ds.features[k]);

  // Zero-shot invariant: a test concept never carries train/val trials.
  std::set<ConceptId> test_concepts, seen_concepts;
  for (const auto& l : ds.labels) (l.split == Split::test ? test_concepts : seen_concepts).insert(l.concept_id);
  for (ConceptId p : test_concepts) {
    if (seen_concepts.count(p)) {
      throw DataError("zero-shot violation: concept " + std::to_string(p) + " appears in test and train/val");
    }
  }
  return ds;
}

SplitPlan make_split(const Dataset& ds, SplitMode mode, SubjectId subject) {
  if (subject < 0 || subject >= ds.manifest.S) {
    throw DataError("subject " + std::to_string(subject) + " out of range [0, " +
                    std::to_string(ds.manifest.S) + ")");
  }
  SplitPlan plan;
  plan.mode = mode;
  plan.subject = subject;
  std::set<ImageId> val_images, test_images;
  for (int n = 0; n < ds.num_trials(); ++n) {
    const TrialLabel& l = ds.labels[n];
    const bool is_subject = l.subject == subject;
    bool use_for_fit, use_for_test;
    if (mode == SplitMode::intra_subject) {
      use_for_fit = is_subject;
      use_for_test = is_subject;
    } else {
      use_for_fit = !is_subject;
      use_for_test = is_subject;
    }
    switch (l.split) {
      case Split::train:
        if (use_for_fit) plan.train.push_back(n);
        break;
      case Split::val:
        if (use_for_fit) {
          plan.val.push_back(n);
          val_images.insert(l.image);
        }
        break;
      case Split::test:
        if (use_for_test) {
          plan.test.push_back(n);
          test_images.insert(l.image);
        }
        break;
    }
  }
  if (plan.train.empty()) throw DataError("split has no training trials");
  if (plan.test.empty()) throw DataError("split has no test trials");
  plan.val_images.assign(val_images.begin(), val_images.end());
  plan.test_images.assign(test_images.begin(), test_images.end());
  return plan;
}

}  // namespace samga
