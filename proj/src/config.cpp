#include "samga/config.hpp"

#include <algorithm>
#include <fstream>

namespace samga {

using nlohmann::json;

namespace {

std::string schedule_name(LambdaSchedule s) { return s == LambdaSchedule::cosine ? "cosine" : "linear"; }

LambdaSchedule schedule_from(const std::string& s) {
  if (s == "linear") return LambdaSchedule::linear;
  if (s == "cosine") return LambdaSchedule::cosine;
  throw ConfigError("loss.lambda_schedule: expected linear|cosine, got '" + s + "'");
}

// Rejects keys absent from the reference document, recursively.
void check_keys(const json& user, const json& reference, const std::string& prefix) {
  for (const auto& [key, val] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (reference.at(key).is_object()) {
      if (!val.is_object()) throw ConfigError("config key '" + path + "' must be an object");
      check_keys(val, reference.at(key), path);
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + section + "." + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  const SynthConfig& d = c.data;
  j["data"] = {{"subjects", d.subjects},
               {"concepts", d.concepts},
               {"images_per_concept", d.images_per_concept},
               {"trials_per_image", d.trials_per_image},
               {"channels", d.channels},
               {"time_samples", d.time_samples},
               {"layer_ids", d.layer_ids},
               {"layer_dims", d.layer_dims},
               {"latent_dim", d.latent_dim},
               {"categories", d.categories},
               {"test_fraction", d.test_fraction},
               {"val_fraction", d.val_fraction},
               {"eeg_noise", d.eeg_noise},
               {"concept_signal", d.concept_signal},
               {"global_depth_logits", d.global_depth_logits},
               {"subject_deviation_logits", d.subject_deviation_logits},
               {"subject_deviation_scale", d.subject_deviation_scale},
               {"category_depth_logits", d.category_depth_logits},
               {"subject_mixing_spread", d.subject_mixing_spread},
               {"category_strength", d.category_strength}};
  j["router"] = {{"tau", c.router.tau},
                 {"p_subject", c.router.p_subject},
                 {"p_layer", c.router.p_layer},
                 {"epsilon", c.router.epsilon},
                 {"init", c.router.depth_prior ? "depth_prior" : "uniform"},
                 {"trainable", c.router.trainable},
                 {"fixed_layer", c.router.fixed_layer}};
  j["model"] = {{"d_common", c.model.d_common},
                {"d_z", c.model.d_z},
                {"eeg_hidden_dim", c.model.eeg_hidden_dim},
                {"projector", to_string(c.model.projector)}};
  j["loss"] = {{"lambda0", c.loss.lambda0},
               {"t_c", c.loss.t_c},
               {"mmd_multipliers", c.loss.mmd_multipliers},
               {"tau_init", c.loss.tau_init},
               {"lambda_schedule", schedule_name(c.loss.lambda_schedule)}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"stage2_lr_multiplier", c.train.stage2_lr_multiplier},
                {"patience", c.train.patience},
                {"eval_every", c.train.eval_every},
                {"freeze_shared", c.train.freeze_shared},
                {"stage_lr", c.train.stage_lr},
                {"split_mode", to_string(c.train.split_mode)},
                {"subject", c.train.subject}};
  j["eval"] = {{"k", c.eval.k}};
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

RunConfig config_from_json(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  json j = to_json(RunConfig{});
  check_keys(user, j, "");
  j.merge_patch(user);
  // merge_patch drops keys set to null; restore them so every key resolves.
  const json defaults = to_json(RunConfig{});
  for (const auto& [section, body] : defaults.items()) {
    if (!j.contains(section)) j[section] = body;
    if (body.is_object()) {
      for (const auto& [key, val] : body.items())
        if (!j[section].contains(key)) j[section][key] = val;
    }
  }

  RunConfig c;
  SynthConfig& d = c.data;
  d.subjects = get<int>(j, "data", "subjects");
  d.concepts = get<int>(j, "data", "concepts");
  d.images_per_concept = get<int>(j, "data", "images_per_concept");
  d.trials_per_image = get<int>(j, "data", "trials_per_image");
  d.channels = get<int>(j, "data", "channels");
  d.time_samples = get<int>(j, "data", "time_samples");
  d.layer_ids = get<std::vector<int>>(j, "data", "layer_ids");
  d.layer_dims = get<std::vector<int>>(j, "data", "layer_dims");
  d.latent_dim = get<int>(j, "data", "latent_dim");
  d.categories = get<int>(j, "data", "categories");
  d.test_fraction = get<double>(j, "data", "test_fraction");
  d.val_fraction = get<double>(j, "data", "val_fraction");
  d.eeg_noise = get<double>(j, "data", "eeg_noise");
  d.concept_signal = get<std::vector<double>>(j, "data", "concept_signal");
  d.global_depth_logits = get<std::vector<double>>(j, "data", "global_depth_logits");
  d.subject_deviation_logits = get<std::vector<std::vector<double>>>(j, "data", "subject_deviation_logits");
  d.subject_deviation_scale = get<double>(j, "data", "subject_deviation_scale");
  d.category_depth_logits = get<std::vector<std::vector<double>>>(j, "data", "category_depth_logits");
  d.subject_mixing_spread = get<double>(j, "data", "subject_mixing_spread");
  d.category_strength = get<double>(j, "data", "category_strength");
  try {
    d.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }

  c.router.tau = get<double>(j, "router", "tau");
  c.router.p_subject = get<double>(j, "router", "p_subject");
  c.router.p_layer = get<double>(j, "router", "p_layer");
  c.router.epsilon = get<double>(j, "router", "epsilon");
  const auto init = get<std::string>(j, "router", "init");
  if (init != "depth_prior" && init != "uniform") {
    throw ConfigError("config key 'router.init': expected depth_prior|uniform, got '" + init + "'");
  }
  c.router.depth_prior = init == "depth_prior";
  c.router.trainable = get<bool>(j, "router", "trainable");
  c.router.fixed_layer = get<int>(j, "router", "fixed_layer");
  if (!(c.router.tau > 0)) throw ConfigError("config key 'router.tau' must be positive");
  if (!(c.router.p_subject >= 0 && c.router.p_subject < 1)) throw ConfigError("config key 'router.p_subject' must lie in [0, 1)");
  if (!(c.router.p_layer >= 0 && c.router.p_layer < 1)) throw ConfigError("config key 'router.p_layer' must lie in [0, 1)");
  if (!(c.router.epsilon > 0)) throw ConfigError("config key 'router.epsilon' must be positive");
  if (c.router.fixed_layer >= static_cast<int>(d.layer_ids.size())) {
    throw ConfigError("config key 'router.fixed_layer' exceeds the number of layers");
  }

  c.model.d_common = get<int>(j, "model", "d_common");
  c.model.d_z = get<int>(j, "model", "d_z");
  c.model.eeg_hidden_dim = get<int>(j, "model", "eeg_hidden_dim");
  try {
    c.model.projector = projector_from_string(get<std::string>(j, "model", "projector"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'model.projector': ") + e.what());
  }
  if (c.model.d_common <= 0) throw ConfigError("config key 'model.d_common' must be positive");
  if (c.model.d_z < 0) throw ConfigError("config key 'model.d_z' must be non-negative");
  if (c.model.eeg_hidden_dim < 0) throw ConfigError("config key 'model.eeg_hidden_dim' must be non-negative");

  c.loss.lambda0 = get<double>(j, "loss", "lambda0");
  c.loss.t_c = get<int>(j, "loss", "t_c");
  c.loss.mmd_multipliers = get<std::vector<double>>(j, "loss", "mmd_multipliers");
  c.loss.tau_init = get<double>(j, "loss", "tau_init");
  c.loss.lambda_schedule = schedule_from(get<std::string>(j, "loss", "lambda_schedule"));
  if (!(c.loss.tau_init > 0)) throw ConfigError("config key 'loss.tau_init' must be positive");

  c.train.epochs = get<int>(j, "train", "epochs");
  c.train.batch_size = get<int>(j, "train", "batch_size");
  c.train.lr = get<double>(j, "train", "lr");
  c.train.weight_decay = get<double>(j, "train", "weight_decay");
  c.train.stage2_lr_multiplier = get<double>(j, "train", "stage2_lr_multiplier");
  c.train.patience = get<int>(j, "train", "patience");
  c.train.eval_every = get<int>(j, "train", "eval_every");
  c.train.freeze_shared = get<bool>(j, "train", "freeze_shared");
  c.train.stage_lr = get<bool>(j, "train", "stage_lr");
  try {
    c.train.split_mode = split_mode_from_string(get<std::string>(j, "train", "split_mode"));
  } catch (const DataError& e) {
    throw ConfigError(std::string("config key 'train.split_mode': ") + e.what());
  }
  c.train.subject = get<int>(j, "train", "subject");
  if (c.train.epochs <= 0) throw ConfigError("config key 'train.epochs' must be positive");

  c.eval.k = get<std::vector<int>>(j, "eval", "k");
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key 'seed'/'out_dir': ") + e.what());
  }

  try {
    make_train_config(c).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ModelSpec make_model_spec(const RunConfig& cfg, const DatasetManifest& manifest) {
  ModelSpec spec;
  spec.subjects = manifest.S;
  for (const auto& l : manifest.layers) spec.layer_dims.push_back(l.dim);
  spec.signal_dim = manifest.signal_dim();
  spec.d_common = cfg.model.d_common;
  spec.d_z = cfg.model.d_z > 0 ? cfg.model.d_z : cfg.model.d_common;
  spec.eeg_hidden_dim = cfg.model.eeg_hidden_dim;
  spec.projector = cfg.model.projector;
  return spec;
}

TrainConfig make_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.schedule.T = cfg.train.epochs;
  t.schedule.T_c = cfg.loss.t_c;
  t.schedule.lambda0 = cfg.loss.lambda0;
  t.schedule.stage2_lr_multiplier = cfg.train.stage2_lr_multiplier;
  t.schedule.shape = cfg.loss.lambda_schedule;
  t.mmd.multipliers = cfg.loss.mmd_multipliers;
  t.batch_size = cfg.train.batch_size;
  t.lr = cfg.train.lr;
  t.weight_decay = cfg.train.weight_decay;
  t.patience = cfg.train.patience;
  t.eval_every = cfg.train.eval_every;
  t.freeze_shared_in_stage2 = cfg.train.freeze_shared;
  t.reduce_lr_in_stage2 = cfg.train.stage_lr;
  t.seed = cfg.seed;
  return t;
}

ModelParams<float> make_initial_model(const RunConfig& cfg, const DatasetManifest& manifest) {
  if (cfg.router.fixed_layer >= manifest.K()) {
    throw ConfigError("router.fixed_layer exceeds the dataset's layer count");
  }
  try {
    return init_model<float>(make_model_spec(cfg, manifest), cfg.router, cfg.loss.tau_init, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace samga
