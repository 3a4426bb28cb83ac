#include "samga/checkpoint.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace samga {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'S', 'A', 'M', 'G', 'A', 'C', 'K', 'P'};

class Writer {
 public:
  explicit Writer(const fs::path& path) : os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_) throw CheckpointError("cannot open " + path.string() + " for writing");
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void finish(const fs::path& path) {
    os_.flush();
    if (!os_) throw CheckpointError("failed writing " + path.string());
  }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : is_(path, std::ios::binary), path_(path) {
    if (!is_) throw CheckpointError("cannot open checkpoint " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw CheckpointError("truncated checkpoint " + path_.string());
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw CheckpointError("corrupt string length in " + path_.string());
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream is_;
  fs::path path_;
};

json spec_to_json(const ModelSpec& s) {
  return {{"subjects", s.subjects},         {"layer_dims", s.layer_dims}, {"signal_dim", s.signal_dim},
          {"d_common", s.d_common},         {"d_z", s.d_z},               {"eeg_hidden_dim", s.eeg_hidden_dim},
          {"projector", to_string(s.projector)}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.subjects = j.at("subjects").get<int>();
  s.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  s.signal_dim = j.at("signal_dim").get<int>();
  s.d_common = j.at("d_common").get<int>();
  s.d_z = j.at("d_z").get<int>();
  s.eeg_hidden_dim = j.at("eeg_hidden_dim").get<int>();
  s.projector = projector_from_string(j.at("projector").get<std::string>());
  return s;
}


EpochRecord record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.stage = j.at("stage").get<int>();
  r.lambda = j.at("lambda").get<double>();
  r.lr = j.at("lr").get<double>();
  r.loss_ret = j.at("loss_ret").get<double>();
  r.loss_mmd = j.at("loss_mmd").get<double>();
  r.loss_total = j.at("loss_total").get<double>();
  r.batches = j.at("batches").get<int>();
  r.skipped_batches = j.at("skipped_batches").get<int>();
  if (!j.at("val_top1").is_null()) r.val_top1 = j.at("val_top1").get<double>();
  return r;
}

// Non-parameter model state: structure plus router and freeze settings.
json model_meta(const ModelParams<float>& p) {
  json j;
  j["spec"] = spec_to_json(p.spec);
  j["router"] = {{"tau", p.router.tau},
                 {"p_subject", p.router.p_subject},
                 {"p_layer", p.router.p_layer},
                 {"epsilon", p.router.epsilon},
                 {"frozen", p.router.frozen}};
  if (p.router.fixed_weights) {
    std::vector<float> w(p.router.fixed_weights->data(), p.router.fixed_weights->data() + p.router.fixed_weights->size());
    j["router"]["fixed_weights"] = w;
  }
  j["shared_frozen"] = p.shared.frozen;
  return j;
}

ModelParams<float> model_from_meta(const json& j) {
  RouterSettings rs;
  ModelParams<float> p = init_model<float>(spec_from_json(j.at("spec")), rs, 0.07, 0);
  const auto& r = j.at("router");
  p.router.tau = r.at("tau").get<float>();
  p.router.p_subject = r.at("p_subject").get<double>();
  p.router.p_layer = r.at("p_layer").get<double>();
  p.router.epsilon = r.at("epsilon").get<float>();
  p.router.frozen = r.at("frozen").get<bool>();
  if (r.contains("fixed_weights")) {
    const auto w = r.at("fixed_weights").get<std::vector<float>>();
    p.router.fixed_weights = Eigen::Map<const Vec<float>>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  p.shared.frozen = j.at("shared_frozen").get<bool>();
  return p;
}

void write_blocks(Writer& w, const ModelParams<float>& p, json& listing, const std::string& group) {
  p.for_each_block([&](const ParamView<const float>& b) {
    w.str(group + "/" + b.name);
    w.u64(static_cast<std::uint64_t>(b.rows));
    w.u64(static_cast<std::uint64_t>(b.cols));
    w.bytes(b.values.data(), b.values.size() * sizeof(float));
    listing.push_back({{"name", group + "/" + b.name}, {"shape", {b.rows, b.cols}}});
  });
}

void read_blocks(Reader& r, ModelParams<float>& p, const std::string& group) {
  p.for_each_block([&](const ParamView<float>& b) {
    const std::string name = r.str();
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (name != group + "/" + b.name) {
      throw CheckpointError("checkpoint block order mismatch: found '" + name + "', expected '" + group + "/" + b.name + "'");
    }
    if (rows != static_cast<std::uint64_t>(b.rows) || cols != static_cast<std::uint64_t>(b.cols)) {
      throw CheckpointError("shape mismatch for block '" + name + "': stored " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " + std::to_string(b.rows) + "x" +
                            std::to_string(b.cols));
    }
    r.bytes(b.values.data(), b.values.size() * sizeof(float));
  });
}

}  // namespace

json record_to_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch},       {"stage", r.stage},       {"lambda", r.lambda},
         {"lr", r.lr},             {"loss_ret", r.loss_ret}, {"loss_mmd", r.loss_mmd},
         {"loss_total", r.loss_total}, {"batches", r.batches}, {"skipped_batches", r.skipped_batches}};
  j["val_top1"] = r.val_top1 ? json(*r.val_top1) : json(nullptr);
  return j;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  json meta;
  meta["model"] = model_meta(ckpt.params);
  meta["has_best"] = ckpt.best.has_value();
  if (ckpt.best) meta["best_model"] = model_meta(*ckpt.best);
  json hist = json::array();
  for (const auto& rec : ckpt.progress.history) hist.push_back(record_to_json(rec));
  meta["progress"] = {{"epochs_done", ckpt.progress.epochs_done},
                      {"best_val_top1", ckpt.progress.best_val_top1},
                      {"best_epoch", ckpt.progress.best_epoch},
                      {"evals_since_best", ckpt.progress.evals_since_best},
                      {"stopped_early", ckpt.progress.stopped_early},
                      {"history", hist}};

  Writer w(path);
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.str(meta.dump());
  w.u64(static_cast<std::uint64_t>(ckpt.optimizer.step));
  w.u64(ckpt.rng_state.size());
  for (auto word : ckpt.rng_state) w.u64(word);

  json listing = json::array();
  write_blocks(w, ckpt.params, listing, "param");
  write_blocks(w, ckpt.optimizer.m, listing, "adam_m");
  write_blocks(w, ckpt.optimizer.v, listing, "adam_v");
  if (ckpt.best) write_blocks(w, *ckpt.best, listing, "best");
  w.finish(path);

  json sidecar{{"version", kCheckpointVersion},
               {"step", ckpt.optimizer.step},
               {"spec", meta["model"]["spec"]},
               {"blocks", listing}};
  std::ofstream os(fs::path(path.string() + ".json"), std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint sidecar for " + path.string());
  os << sidecar.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& path, const ModelSpec* expected) {
  Reader r(path);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw CheckpointError(path.string() + " is not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  json meta;
  try {
    meta = json::parse(r.str());
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint metadata: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  try {
    ckpt.params = model_from_meta(meta.at("model"));
    if (meta.at("has_best").get<bool>()) ckpt.best = model_from_meta(meta.at("best_model"));
    const auto& pr = meta.at("progress");
    ckpt.progress.epochs_done = pr.at("epochs_done").get<int>();
    ckpt.progress.best_val_top1 = pr.at("best_val_top1").get<double>();
    ckpt.progress.best_epoch = pr.at("best_epoch").get<int>();
    ckpt.progress.evals_since_best = pr.at("evals_since_best").get<int>();
    ckpt.progress.stopped_early = pr.at("stopped_early").get<bool>();
    for (const auto& rec : pr.at("history")) ckpt.progress.history.push_back(record_from_json(rec));
  } catch (const json::exception& e) {
    throw CheckpointError("invalid checkpoint metadata: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("invalid checkpoint model: " + std::string(e.what()));
  }

  if (expected) {
    const ModelSpec& s = ckpt.params.spec;
    if (s.K() != expected->K()) {
      throw CheckpointError("shape error: checkpoint has K = " + std::to_string(s.K()) + " layers, expected " +
                            std::to_string(expected->K()));
    }
    if (s.layer_dims != expected->layer_dims || s.subjects != expected->subjects ||
        s.signal_dim != expected->signal_dim || s.d_common != expected->d_common || s.d_z != expected->d_z ||
        s.eeg_hidden_dim != expected->eeg_hidden_dim || s.projector != expected->projector) {
      throw CheckpointError("shape error: checkpoint model structure differs from the expected one");
    }
  }

  ckpt.optimizer = OptimizerState<float>::like(ckpt.params);
  ckpt.optimizer.step = static_cast<std::int64_t>(r.u64());
  const auto n_words = r.u64();
  if (n_words > 100000) throw CheckpointError("corrupt rng state length");
  ckpt.rng_state.resize(n_words);
  for (auto& word : ckpt.rng_state) word = r.u64();

  read_blocks(r, ckpt.params, "param");
  read_blocks(r, ckpt.optimizer.m, "adam_m");
  read_blocks(r, ckpt.optimizer.v, "adam_v");
  if (ckpt.best) read_blocks(r, *ckpt.best, "best");
  if (!r.at_end()) throw CheckpointError("trailing bytes in checkpoint " + path.string());
  return ckpt;
}

}  // namespace samga
