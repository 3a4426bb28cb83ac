// samga: data generation, training, evaluation, ablation, analysis and
// gradient checking from one JSON config.
//
// Exit codes: 0 ok, 1 check failed, 2 config, 3 I/O, 4 numeric, 5 missing
// prerequisite.

#include "samga/ablation.hpp"
#include "samga/checkpoint.hpp"
#include "samga/config.hpp"
#include "samga/evaluator.hpp"
#include "samga/gradcheck.hpp"
#include "samga/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace samga;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfig = 2, kIo = 3, kNumeric = 4, kPrerequisite = 5 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingPrerequisite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// key=value lines by default, one JSON object with --json.
class Output {
 public:
  explicit Output(bool as_json) : json_(as_json) {}
  void put(const std::string& key, const json& value) {
    if (json_) {
      obj_[key] = value;
    } else {
      std::cout << key << '=' << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
    }
  }
  void flush() {
    if (json_) std::cout << obj_.dump() << '\n';
  }

 private:
  bool json_;
  json obj_ = json::object();
};

// Exclusive lock on a run directory for the lifetime of a command.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw IoError("run directory " + dir.string() + " is locked by another process (" + path_.string() + ")");
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
};

json config_json(const ConfigArgs& a) {
  json j = a.config.empty() ? json::object() : [&] {
    std::ifstream is(a.config);
    if (!is) throw ConfigError("cannot open config " + a.config);
    try {
      return json::parse(is);
    } catch (const json::parse_error& e) {
      throw ConfigError("malformed config " + a.config + ": " + e.what());
    }
  }();
  for (const auto& o : a.overrides) apply_override(j, o);
  return j;
}

bool has_key(const json& j, const std::string& section, const std::string& key) {
  return j.is_object() && j.contains(section) && j[section].is_object() && j[section].contains(key);
}

fs::path manifest_path(const std::string& data) {
  fs::path p(data);
  if (fs::is_directory(p)) p /= "manifest.json";
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw IoError("malformed " + path.string() + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string matrix_csv(const MatD& m, const std::vector<std::string>& row_names,
                       const std::vector<std::string>& col_names, const std::string& corner) {
  std::ostringstream os;
  os << corner;
  for (const auto& c : col_names) os << ',' << c;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << row_names[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << (std::isnan(m(i, j)) ? std::string("nan") : fmt(m(i, j)));
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> layer_names(const DatasetManifest& m) {
  std::vector<std::string> out;
  for (const auto& l : m.layers) out.push_back("layer_" + std::to_string(l.layer_id));
  return out;
}

json retrieval_json(const RetrievalResult& r) {
  json topk = json::object();
  for (std::size_t i = 0; i < r.k_list.size(); ++i) topk["top" + std::to_string(r.k_list[i])] = r.topk[i];
  return {{"n_way", r.n_way}, {"n_queries", r.n_queries}, {"topk", topk}};
}

std::vector<SubjectId> trained_subjects(const SplitPlan& split, int S) {
  std::vector<SubjectId> out;
  for (SubjectId s = 0; s < S; ++s) {
    if (split.mode == SplitMode::intra_subject ? s == split.subject : s != split.subject) out.push_back(s);
  }
  return out;
}

json routing_json(const RoutingReport& rep) {
  json j{{"global_weights", std::vector<double>(rep.global_weights.data(),
                                                rep.global_weights.data() + rep.global_weights.size())},
         {"learned_argmax", rep.learned_argmax}};
  if (rep.planted_argmax) j["planted_argmax"] = *rep.planted_argmax;
  if (rep.global_argmax_match) j["argmax_match"] = *rep.global_argmax_match;
  j["mean_spearman"] = rep.mean_spearman ? json(*rep.mean_spearman) : json(nullptr);
  return j;
}

// Resolves the split for a config, requiring an explicit subject in intra mode.
SplitPlan resolve_split(const RunConfig& cfg, const json& raw, const Dataset& ds, bool subject_given) {
  if (cfg.train.split_mode == SplitMode::intra_subject && !subject_given && !has_key(raw, "train", "subject")) {
    throw ConfigError("intra-subject mode needs --subject (or train.subject in the config)");
  }
  if (cfg.train.subject < 0 || cfg.train.subject >= ds.manifest.S) {
    throw ConfigError("train.subject " + std::to_string(cfg.train.subject) + " out of range [0, " +
                      std::to_string(ds.manifest.S) + ")");
  }
  return make_split(ds, cfg.train.split_mode, cfg.train.subject);
}

Dataset load_data(const std::string& data) { return load_dataset(manifest_path(data)); }

// --- commands ----------------------------------------------------------------

int cmd_gen_data(const ConfigArgs& ca, const std::string& out_dir, Output& out) {
  const RunConfig cfg = config_from_json(config_json(ca));
  const GeneratedData gen = generate_synthetic(cfg.data, cfg.seed);
  DirLock lock(out_dir);
  save_dataset(gen.dataset, out_dir);
  out.put("out", out_dir);
  out.put("trials", gen.dataset.num_trials());
  out.put("subjects", gen.dataset.manifest.S);
  out.put("concepts", gen.dataset.manifest.P);
  out.put("images", gen.dataset.manifest.num_images());
  out.put("layers", gen.dataset.manifest.K());
  return kOk;
}

int cmd_train(const ConfigArgs& ca, const std::string& data, const std::string& out_dir,
              const std::string& split_mode, std::optional<int> subject, bool resume, bool quiet, Output& out) {
  json raw = config_json(ca);
  if (!split_mode.empty()) apply_override(raw, "train.split_mode=\"" + split_mode + "\"");
  if (subject) apply_override(raw, "train.subject=" + std::to_string(*subject));
  if (!out_dir.empty()) raw["out_dir"] = out_dir;
  const RunConfig cfg = config_from_json(raw);
  const Dataset ds = load_data(data);
  const SplitPlan split = resolve_split(cfg, raw, ds, subject.has_value());

  const fs::path run(cfg.out_dir);
  DirLock lock(run);
  const fs::path ckpt_path = run / "checkpoint.bin";
  const TrainConfig tc = make_train_config(cfg);
  const ModelSpec spec = make_model_spec(cfg, ds.manifest);

  std::optional<Trainer> trainer;
  if (resume && fs::exists(ckpt_path)) {
    trainer.emplace(ds, split, tc, load_checkpoint(ckpt_path, &spec));
  } else {
    trainer.emplace(ds, split, tc, make_initial_model(cfg, ds.manifest));
  }
  const TrainResult result = trainer->run([&](const EpochRecord& r, const ModelParams<float>&) {
    if (quiet) return;
    std::cerr << "epoch " << r.epoch << " stage " << r.stage << " lambda " << fmt(r.lambda) << " lr " << fmt(r.lr)
              << " loss " << fmt(r.loss_total);
    if (r.val_top1) std::cerr << " val_top1 " << fmt(*r.val_top1);
    std::cerr << '\n';
  });
  save_checkpoint(trainer->checkpoint(), ckpt_path);

  const RetrievalResult test = evaluate_retrieval(result.model, ds, split.test, split.test_images, cfg.eval.k);
  const RoutingReport routing =
      routing_report(result.model, ds.manifest, trained_subjects(split, ds.manifest.S));

  json history = json::array();
  for (const auto& rec : result.progress.history) history.push_back(record_to_json(rec));
  json report{{"config", to_json(cfg)},
              {"seed", cfg.seed},
              {"split", {{"mode", to_string(split.mode)}, {"subject", split.subject},
                         {"train_trials", split.train.size()}, {"val_trials", split.val.size()},
                         {"test_trials", split.test.size()}}},
              {"test", retrieval_json(test)},
              {"training", {{"epochs_done", result.progress.epochs_done},
                            {"best_epoch", result.progress.best_epoch},
                            {"best_val_top1", result.progress.best_val_top1},
                            {"stopped_early", result.progress.stopped_early},
                            {"history", history}}},
              {"routing", routing_json(routing)}};
  write_text(run / "report.json", report.dump(2) + "\n");

  out.put("run", run.string());
  out.put("epochs", result.progress.epochs_done);
  out.put("best_epoch", result.progress.best_epoch);
  out.put("n_way", test.n_way);
  for (std::size_t i = 0; i < test.k_list.size(); ++i) out.put("top" + std::to_string(test.k_list[i]), test.topk[i]);
  out.put("routing_argmax", routing.learned_argmax);
  return kOk;
}

struct LoadedRun {
  json report;
  RunConfig cfg;
  Checkpoint ckpt;
  const ModelParams<float>& model() const { return ckpt.best ? *ckpt.best : ckpt.params; }
};

LoadedRun load_run(const fs::path& run, const Dataset& ds) {
  const fs::path report = run / "report.json";
  const fs::path ckpt = run / "checkpoint.bin";
  if (!fs::exists(report) || !fs::exists(ckpt)) {
    throw MissingPrerequisite("no trained run in " + run.string() + "; run `samga train` first");
  }
  LoadedRun r{read_json(report), {}, {}};
  r.cfg = config_from_json(r.report.at("config"));
  const ModelSpec spec = make_model_spec(r.cfg, ds.manifest);
  r.ckpt = load_checkpoint(ckpt, &spec);
  return r;
}

int cmd_eval(const std::string& run_dir, const std::string& data, const std::vector<int>& k, Output& out) {
  const Dataset ds = load_data(data);
  const fs::path run(run_dir);
  DirLock lock(run);
  LoadedRun r = load_run(run, ds);
  const SplitPlan split = make_split(ds, r.cfg.train.split_mode, r.cfg.train.subject);
  const RetrievalResult res =
      evaluate_retrieval(r.model(), ds, split.test, split.test_images, k.empty() ? r.cfg.eval.k : k);
  r.report["eval"] = retrieval_json(res);
  write_text(run / "report.json", r.report.dump(2) + "\n");
  out.put("n_way", res.n_way);
  out.put("n_queries", res.n_queries);
  for (std::size_t i = 0; i < res.k_list.size(); ++i) out.put("top" + std::to_string(res.k_list[i]), res.topk[i]);
  return kOk;
}

json sweep_json(const LayerSweep& sweep) {
  json layers = json::array();
  for (std::size_t k = 0; k < sweep.layer_ids.size(); ++k) {
    json runs = json::array();
    for (const auto& run : sweep.runs[k]) {
      json cat = json::array();
      for (double a : run.category_top1) cat.push_back(std::isnan(a) ? json(nullptr) : json(a));
      runs.push_back({{"top1", run.test.top1()}, {"category_top1", cat}});
    }
    layers.push_back({{"layer_id", sweep.layer_ids[k]}, {"runs", runs}});
  }
  return {{"layers", layers}};
}

int cmd_ablate(const ConfigArgs& ca, const std::string& data, const std::string& out_dir,
               const std::vector<std::string>& variant_names_in, const std::vector<std::uint64_t>& seeds,
               Output& out) {
  std::vector<Variant> variants;
  for (const auto& v : variant_names_in) variants.push_back(parse_variant(v));
  json raw = config_json(ca);
  if (!out_dir.empty()) raw["out_dir"] = out_dir;
  const RunConfig cfg = config_from_json(raw);
  const Dataset ds = load_data(data);
  const SplitPlan split = resolve_split(cfg, raw, ds, false);
  if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");

  const fs::path dir(cfg.out_dir);
  DirLock lock(dir);
  std::optional<LayerSweep> sweep;
  std::ostringstream csv;
  csv << "variant,n_seeds,top1_mean,top1_sd,top5_mean,top5_sd,best_layer_id\n";
  for (const auto& v : variants) {
    AblationRow row;
    if (v.kind == Variant::Kind::single_best) {
      if (!sweep) sweep = sweep_single_layers(ds, split, cfg, seeds);
      row = single_best_row(*sweep);
    } else {
      row = run_ablation(ds, split, v, cfg, seeds);
    }
    csv << row.variant << ',' << row.n_seeds << ',' << fmt(row.top1_mean) << ',' << fmt(row.top1_sd) << ','
        << fmt(row.top5_mean) << ',' << fmt(row.top5_sd) << ',';
    if (row.best_layer_id >= 0) csv << row.best_layer_id;
    csv << '\n';
    out.put(row.variant + ".top1_mean", row.top1_mean);
    out.put(row.variant + ".top1_sd", row.top1_sd);
    out.put(row.variant + ".top5_mean", row.top5_mean);
    out.put(row.variant + ".top5_sd", row.top5_sd);
  }
  write_text(dir / "ablation.csv", csv.str());
  json summary{{"config", to_json(cfg)}, {"seeds", seeds}, {"variants", variant_names_in}};
  write_text(dir / "ablation.json", summary.dump(2) + "\n");
  if (sweep) write_text(dir / "layer_sweep.json", sweep_json(*sweep).dump(2) + "\n");
  out.put("ablation_csv", (dir / "ablation.csv").string());
  return kOk;
}

int cmd_analyze(const std::string& run_dir, const std::string& data, const std::string& what, bool center,
                Output& out) {
  const Dataset ds = load_data(data);
  const fs::path run(run_dir);
  DirLock lock(run);
  if (what == "layerwise") {
    const fs::path sweep_path = run / "layer_sweep.json";
    if (!fs::exists(sweep_path)) {
      throw MissingPrerequisite("no single-layer runs in " + run.string() +
                                "; run `samga ablate --variants single_best` into this directory first");
    }
    const json j = read_json(sweep_path);
    const int G = ds.manifest.num_categories();
    const auto& layers = j.at("layers");
    MatD table = MatD::Constant(G, static_cast<Eigen::Index>(layers.size()), std::nan(""));
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      cols.push_back("layer_" + std::to_string(layers[k].at("layer_id").get<int>()));
      for (int g = 0; g < G; ++g) {
        double sum = 0;
        int n = 0;
        for (const auto& r : layers[k].at("runs")) {
          const auto& v = r.at("category_top1").at(g);
          if (!v.is_null()) {
            sum += v.get<double>();
            ++n;
          }
        }
        if (n) table(g, static_cast<Eigen::Index>(k)) = sum / n;
      }
    }
    std::vector<std::string> rows;
    for (int g = 0; g < G; ++g) rows.push_back("category_" + std::to_string(g));
    write_text(run / "layerwise_acc.csv", matrix_csv(table, rows, cols, "category"));
    for (int g = 0; g < G; ++g) {
      Eigen::Index best = 0;
      table.row(g).maxCoeff(&best);
      out.put("category_" + std::to_string(g) + ".best_layer", cols[best]);
    }
    out.put("layerwise_csv", (run / "layerwise_acc.csv").string());
    return kOk;
  }

  LoadedRun r = load_run(run, ds);
  if (what == "routing") {
    const SplitPlan split = make_split(ds, r.cfg.train.split_mode, r.cfg.train.subject);
    const RoutingReport rep = routing_report(r.model(), ds.manifest, trained_subjects(split, ds.manifest.S));
    std::vector<std::string> rows;
    for (int s = 0; s < ds.manifest.S; ++s) rows.push_back("subject_" + std::to_string(s));
    write_text(run / "routing_deviation.csv", matrix_csv(rep.deviation, rows, layer_names(ds.manifest), "subject"));
    out.put("learned_argmax", rep.learned_argmax);
    if (rep.planted_argmax) out.put("planted_argmax", *rep.planted_argmax);
    if (rep.global_argmax_match) out.put("argmax_match", *rep.global_argmax_match);
    out.put("mean_spearman", rep.mean_spearman ? json(*rep.mean_spearman) : json("n/a"));
    out.put("routing_csv", (run / "routing_deviation.csv").string());
    return kOk;
  }
  if (what == "similarity") {
    const ConceptSimilarity sim = concept_similarity_matrix(r.model(), ds, center, true);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < sim.concepts.size(); ++i) {
      names.push_back("c" + std::to_string(sim.concepts[i]) + "_g" + std::to_string(sim.categories[i]));
    }
    write_text(run / "concept_sim.csv", matrix_csv(sim.matrix, names, names, "concept"));
    const int G = ds.manifest.num_categories();
    const MatD cat = category_similarity_matrix(sim.matrix, sim.categories, G);
    std::vector<std::string> cats;
    for (int g = 0; g < G; ++g) cats.push_back("category_" + std::to_string(g));
    write_text(run / "category_sim.csv", matrix_csv(cat, cats, cats, "category"));
    out.put("concepts", sim.concepts.size());
    out.put("concept_csv", (run / "concept_sim.csv").string());
    out.put("category_csv", (run / "category_sim.csv").string());
    return kOk;
  }
  throw ConfigError("unknown report '" + what + "' (expected routing|similarity|layerwise)");
}

int cmd_gradcheck(const ConfigArgs& ca, const std::string& objective, const std::string& corrupt, bool freeze_shared,
                  Output& out) {
  GradcheckConfig base;
  if (!ca.config.empty() || !ca.overrides.empty()) {
    const RunConfig cfg = config_from_json(config_json(ca));
    base.projector = cfg.model.projector;
    if (cfg.model.eeg_hidden_dim > 0) base.eeg_hidden_dim = 4;
  }
  base.freeze_shared = freeze_shared;
  base.corrupt_block = corrupt;
  std::vector<std::pair<std::string, double>> objectives;
  if (objective == "mixed" || objective == "both") objectives.emplace_back("mixed", 0.5);
  if (objective == "retrieval" || objective == "both") objectives.emplace_back("retrieval", 0.0);
  if (objectives.empty()) throw ConfigError("--objective expects mixed|retrieval|both");

  bool ok = true;
  for (const auto& [name, lambda] : objectives) {
    GradcheckConfig c = base;
    c.lambda = lambda;
    const GradcheckReport rep = gradcheck(c);
    ok = ok && rep.passed();
    for (const auto& b : rep.blocks) {
      const char* status = b.status == BlockStatus::pass ? "PASS" : b.status == BlockStatus::fail ? "FAIL" : "SKIPPED";
      out.put(name + "." + b.name, std::string(status) + " " + fmt(b.max_rel_error));
    }
  }
  out.put("result", ok ? "pass" : "fail");
  return ok ? kOk : kCheckFailed;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAMGA desk-scale EEG-to-image retrieval engine"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Print one JSON object instead of key=value lines");

  auto add_config = [](CLI::App* sub, ConfigArgs& ca) {
    sub->add_option("--config", ca.config, "JSON config file");
    sub->add_option("--set", ca.overrides, "Override a config key (section.key=value)")->take_all();
  };

  ConfigArgs gen_ca, train_ca, ablate_ca, gc_ca;
  std::string gen_out, data, out_dir, split_mode, run_dir, k_list, variants, seeds = "0,1,2,3,4", report,
                                                                             objective = "both", corrupt;
  std::optional<int> subject;
  bool resume = false, quiet = false, center = false, freeze_shared = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_config(gen, gen_ca);
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train one model");
  add_config(tr, train_ca);
  tr->add_option("--data", data, "Dataset directory or manifest.json")->required();
  tr->add_option("--out", out_dir, "Run directory (defaults to out_dir)");
  tr->add_option("--split-mode", split_mode, "intra|loso");
  tr->add_option("--subject", subject, "Trained (intra) or held-out (loso) subject");
  tr->add_flag("--resume", resume, "Continue from the run's checkpoint if present");
  tr->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  auto* ev = app.add_subcommand("eval", "Evaluate a trained run on its test split");
  ev->add_option("--run", run_dir, "Run directory")->required();
  ev->add_option("--data", data, "Dataset directory or manifest.json")->required();
  ev->add_option("--k", k_list, "Comma-separated k values");

  auto* ab = app.add_subcommand("ablate", "Run ablation variants over seeds");
  add_config(ab, ablate_ca);
  ab->add_option("--data", data, "Dataset directory or manifest.json")->required();
  ab->add_option("--out", out_dir, "Output directory (defaults to out_dir)");
  ab->add_option("--variants", variants, "Comma-separated variants")->required();
  ab->add_option("--seeds", seeds, "Comma-separated seeds");

  auto* an = app.add_subcommand("analyze", "Export analysis CSVs for a run");
  an->add_option("--run", run_dir, "Run or ablation directory")->required();
  an->add_option("--data", data, "Dataset directory or manifest.json")->required();
  an->add_option("--report", report, "routing|similarity|layerwise")->required();
  an->add_flag("--center", center, "Subtract the mean off-diagonal similarity");

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients to central differences");
  add_config(gc, gc_ca);
  gc->add_option("--objective", objective, "mixed|retrieval|both");
  gc->add_option("--corrupt-block", corrupt, "Perturb one block's analytic gradient (self-test)");
  gc->add_flag("--freeze-shared", freeze_shared, "Check with the shared encoder frozen");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  Output out(as_json);
  int code = kOk;
  try {
    if (*gen) {
      code = cmd_gen_data(gen_ca, gen_out, out);
    } else if (*tr) {
      code = cmd_train(train_ca, data, out_dir, split_mode, subject, resume, quiet, out);
    } else if (*ev) {
      std::vector<int> ks;
      for (const auto& s : split_list(k_list)) ks.push_back(std::stoi(s));
      code = cmd_eval(run_dir, data, ks, out);
    } else if (*ab) {
      std::vector<std::uint64_t> seed_list;
      for (const auto& s : split_list(seeds)) seed_list.push_back(std::stoull(s));
      code = cmd_ablate(ablate_ca, data, out_dir, split_list(variants), seed_list, out);
    } else if (*an) {
      code = cmd_analyze(run_dir, data, report, center, out);
    } else if (*gc) {
      code = cmd_gradcheck(gc_ca, objective, corrupt, freeze_shared, out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const MissingPrerequisite& e) {
    std::cerr << "missing prerequisite: " << e.what() << '\n';
    return kPrerequisite;
  } catch (const DataError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const CheckpointError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }
  out.flush();
  return code;
}
