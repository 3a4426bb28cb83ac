#include "samga/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace samga {

namespace {

struct NamedKind {
  const char* name;
  Variant::Kind kind;
};

constexpr NamedKind kKinds[] = {
    {"learned", Variant::Kind::learned},
    {"uniform", Variant::Kind::uniform},
    {"single_best", Variant::Kind::single_best},
    {"one_stage", Variant::Kind::one_stage},
    {"no_stage_lr", Variant::Kind::no_stage_lr},
    {"no_freeze", Variant::Kind::no_freeze},
    {"projector_direct", Variant::Kind::projector_direct},
    {"projector_linear", Variant::Kind::projector_linear},
    {"projector_mlp", Variant::Kind::projector_mlp},
};

constexpr const char* kSingleLayerPrefix = "single_layer:";

}  // namespace

std::string Variant::name() const {
  if (kind == Kind::single_layer) return kSingleLayerPrefix + std::to_string(layer_id);
  for (const auto& nk : kKinds) {
    if (nk.kind == kind) return nk.name;
  }
  return "learned";
}

std::string variant_names() {
  std::string out;
  for (const auto& nk : kKinds) {
    out += nk.name;
    out += ", ";
  }
  return out + kSingleLayerPrefix + "<layer_id>";
}

Variant parse_variant(const std::string& name) {
  for (const auto& nk : kKinds) {
    if (name == nk.name) return Variant{nk.kind, -1};
  }
  const std::string prefix = kSingleLayerPrefix;
  if (name.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const int id = std::stoi(name.substr(prefix.size()), &used);
      if (used == name.size() - prefix.size()) return Variant{Variant::Kind::single_layer, id};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown variant '" + name + "'; valid variants: " + variant_names());
}

RunConfig apply_variant(RunConfig cfg, const Variant& v, const DatasetManifest& manifest) {
  using K = Variant::Kind;
  switch (v.kind) {
    case K::learned:
    case K::single_best:
      break;
    case K::uniform:
      cfg.router.depth_prior = false;
      cfg.router.trainable = false;
      break;
    case K::single_layer: {
      int index = -1;
      for (int k = 0; k < manifest.K(); ++k)
        if (manifest.layers[k].layer_id == v.layer_id) index = k;
      if (index < 0) throw ConfigError("dataset has no layer with id " + std::to_string(v.layer_id));
      cfg.router.fixed_layer = index;
      break;
    }
    case K::one_stage:
      // One coarse phase spanning all epochs: no freeze and no lr drop ever occur.
      cfg.loss.t_c = cfg.train.epochs;
      break;
    case K::no_stage_lr:
      cfg.train.stage_lr = false;
      break;
    case K::no_freeze:
      cfg.train.freeze_shared = false;
      break;
    case K::projector_direct:
      cfg.model.projector = ProjectorKind::direct;
      if (cfg.model.eeg_hidden_dim == 0) cfg.model.eeg_hidden_dim = cfg.model.d_common;
      break;
    case K::projector_linear:
      cfg.model.projector = ProjectorKind::linear;
      break;
    case K::projector_mlp:
      cfg.model.projector = ProjectorKind::mlp;
      break;
  }
  return cfg;
}

RunOutcome run_pipeline(const Dataset& ds, const SplitPlan& split, const RunConfig& cfg,
                        const EpochObserver& observer) {
  RunOutcome out;
  out.training = train(ds, split, make_train_config(cfg), make_initial_model(cfg, ds.manifest), observer);
  out.test = evaluate_retrieval(out.training.model, ds, split.test, split.test_images, cfg.eval.k);
  out.category_top1 = per_category_top1(out.test, ds, split.test);
  return out;
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

AblationRow summarize(const std::string& variant, const std::vector<RunOutcome>& runs) {
  AblationRow row;
  row.variant = variant;
  row.n_seeds = static_cast<int>(runs.size());
  for (const auto& r : runs) {
    row.top1_per_seed.push_back(r.test.at(1));
    row.top5_per_seed.push_back(r.test.at(5));
  }
  const MeanSd t1 = mean_sd(row.top1_per_seed);
  const MeanSd t5 = mean_sd(row.top5_per_seed);
  row.top1_mean = t1.mean;
  row.top1_sd = t1.sd;
  row.top5_mean = t5.mean;
  row.top5_sd = t5.sd;
  return row;
}

LayerSweep sweep_single_layers(const Dataset& ds, const SplitPlan& split, const RunConfig& cfg,
                               const std::vector<std::uint64_t>& seeds) {
  LayerSweep sweep;
  for (const auto& layer : ds.manifest.layers) {
    const RunConfig base = apply_variant(cfg, Variant{Variant::Kind::single_layer, layer.layer_id}, ds.manifest);
    std::vector<RunOutcome> runs;
    for (auto seed : seeds) {
      RunConfig c = base;
      c.seed = seed;
      runs.push_back(run_pipeline(ds, split, c));
    }
    sweep.layer_ids.push_back(layer.layer_id);
    sweep.runs.push_back(std::move(runs));
  }
  return sweep;
}

AblationRow single_best_row(const LayerSweep& sweep) {
  AblationRow best;
  best.top1_mean = -1.0;
  for (std::size_t k = 0; k < sweep.runs.size(); ++k) {
    AblationRow row = summarize("single_best", sweep.runs[k]);
    if (row.top1_mean > best.top1_mean) {
      best = row;
      best.best_layer_id = sweep.layer_ids[k];
    }
  }
  return best;
}

AblationRow run_ablation(const Dataset& ds, const SplitPlan& split, const Variant& v, const RunConfig& cfg,
                         const std::vector<std::uint64_t>& seeds, const LayerSweep* sweep) {
  if (v.kind == Variant::Kind::single_best) {
    if (sweep) return single_best_row(*sweep);
    return single_best_row(sweep_single_layers(ds, split, cfg, seeds));
  }
  const RunConfig base = apply_variant(cfg, v, ds.manifest);
  std::vector<RunOutcome> runs;
  for (auto seed : seeds) {
    RunConfig c = base;
    c.seed = seed;
    runs.push_back(run_pipeline(ds, split, c));
  }
  return summarize(v.name(), runs);
}

MatD layerwise_category_accuracy(const LayerSweep& sweep, int n_categories) {
  const auto K = static_cast<Eigen::Index>(sweep.runs.size());
  MatD table = MatD::Constant(n_categories, K, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index k = 0; k < K; ++k) {
    for (int g = 0; g < n_categories; ++g) {
      double sum = 0.0;
      int count = 0;
      for (const auto& run : sweep.runs[k]) {
        const double a = run.category_top1.at(g);
        if (!std::isnan(a)) {
          sum += a;
          ++count;
        }
      }
      if (count) table(g, k) = sum / count;
    }
  }
  return table;
}

}  // namespace samga
