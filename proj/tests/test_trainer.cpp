#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samga/checkpoint.hpp"
#include "samga/config.hpp"
#include "samga/gradcheck.hpp"
#include "samga/trainer.hpp"
#include "test_util.hpp"

using namespace samga;

namespace {

RunConfig small_run() {
  RunConfig c;
  c.data.subjects = 3;
  c.data.concepts = 20;
  c.data.images_per_concept = 2;
  c.data.trials_per_image = 2;
  c.data.channels = 4;
  c.data.time_samples = 8;
  c.data.val_fraction = 0.2;
  c.model.d_common = 8;
  c.train.epochs = 6;
  c.train.batch_size = 16;
  c.train.patience = 0;
  c.loss.t_c = 3;
  c.train.lr = 5e-3;
  c.seed = 3;
  return c;
}

struct Fixture {
  RunConfig cfg = small_run();
  Dataset ds = generate_synthetic(cfg.data, cfg.seed).dataset;
  SplitPlan split = make_split(ds, SplitMode::leave_one_subject_out, 0);
};

bool params_bitwise_equal(const ModelParams<float>& a, const ModelParams<float>& b) {
  std::vector<std::vector<float>> va, vb;
  a.for_each_block([&](const ParamView<const float>& v) { va.emplace_back(v.values.begin(), v.values.end()); });
  b.for_each_block([&](const ParamView<const float>& v) { vb.emplace_back(v.values.begin(), v.values.end()); });
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].size() != vb[i].size()) return false;
    if (std::memcmp(va[i].data(), vb[i].data(), va[i].size() * sizeof(float)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gradcheck passes on every block for both objectives") {
  for (double lambda : {0.5, 0.0}) {
    GradcheckConfig c;
    c.lambda = lambda;
    const GradcheckReport r = gradcheck(c);
    CHECK(r.passed());
    std::vector<std::string> names;
    for (const auto& b : r.blocks) {
      CAPTURE(b.name);
      CHECK(b.status == BlockStatus::pass);
      CHECK(b.max_rel_error < 1e-4);
      names.push_back(b.name);
    }
    for (const char* want : {"projector.0.W", "router.q", "router.b", "eeg.proj.W", "shared.G", "head.log_tau"})
      CHECK(std::find(names.begin(), names.end(), want) != names.end());
  }
}

TEST_CASE("gradcheck covers hidden-layer and projector variants") {
  for (auto kind : {ProjectorKind::direct, ProjectorKind::linear, ProjectorKind::mlp}) {
    GradcheckConfig c;
    c.projector = kind;
    c.eeg_hidden_dim = 4;
    CAPTURE(to_string(kind));
    CHECK(gradcheck(c).passed());
  }
}

TEST_CASE("gradcheck detects a corrupted gradient") {
  GradcheckConfig c;
  c.corrupt_block = "router.b";
  const GradcheckReport r = gradcheck(c);
  CHECK_FALSE(r.passed());
  for (const auto& b : r.blocks) CHECK((b.status == BlockStatus::fail) == (b.name == "router.b"));
}

TEST_CASE("gradcheck lists a frozen block as skipped") {
  GradcheckConfig c;
  c.freeze_shared = true;
  const GradcheckReport r = gradcheck(c);
  CHECK(r.passed());
  int skipped = 0;
  for (const auto& b : r.blocks) {
    if (b.name.rfind("shared.", 0) == 0) {
      CHECK(b.status == BlockStatus::skipped);
      ++skipped;
    }
  }
  CHECK(skipped == 2);
}

TEST_CASE("relative error handles tiny magnitudes") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 1.0 + 1e-9) < 1e-8);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("stage mechanics: frozen shared encoder, reduced lr, lambda schedule") {
  Fixture f;
  const TrainConfig tc = make_train_config(f.cfg);
  std::vector<MatF> shared_by_epoch;
  std::vector<EpochRecord> records;
  train(f.ds, f.split, tc, make_initial_model(f.cfg, f.ds.manifest), [&](const EpochRecord& r, const ModelParams<float>& p) {
    records.push_back(r);
    shared_by_epoch.push_back(p.shared.map.W);
  });
  REQUIRE(records.size() == 6);
  for (int e = 4; e < 6; ++e) CHECK(test_util::bitwise_equal(shared_by_epoch[e], shared_by_epoch[2]));
  CHECK_FALSE(test_util::bitwise_equal(shared_by_epoch[0], shared_by_epoch[1]));
  for (const auto& r : records) {
    if (r.epoch <= 3) {
      CHECK(r.stage == 1);
      CHECK(r.lr == tc.lr);
    } else {
      CHECK(r.stage == 2);
      CHECK(r.lr == tc.lr * tc.schedule.stage2_lr_multiplier);
      CHECK(r.lambda == 0.0);
    }
  }
  for (std::size_t i = 1; i < records.size(); ++i) CHECK(records[i].lambda <= records[i - 1].lambda);
}

TEST_CASE("zero learning rate leaves every parameter unchanged") {
  Fixture f;
  f.cfg.train.lr = 0.0;
  f.cfg.train.weight_decay = 0.0;
  const auto init = make_initial_model(f.cfg, f.ds.manifest);
  TrainConfig tc = make_train_config(f.cfg);
  tc.lr = 0.0;
  Trainer t(f.ds, f.split, tc, init);
  while (!t.done()) t.run_epoch();
  CHECK(params_bitwise_equal(t.params(), init));
}

TEST_CASE("training is deterministic and resumes bit-for-bit from a checkpoint") {
  Fixture f;
  const TrainConfig tc = make_train_config(f.cfg);
  const auto init = make_initial_model(f.cfg, f.ds.manifest);

  Trainer straight(f.ds, f.split, tc, init);
  while (!straight.done()) straight.run_epoch();
  Trainer again(f.ds, f.split, tc, init);
  while (!again.done()) again.run_epoch();
  CHECK(params_bitwise_equal(straight.params(), again.params()));

  test_util::TempDir dir;
  Trainer first(f.ds, f.split, tc, init);
  for (int e = 0; e < 4; ++e) first.run_epoch();
  save_checkpoint(first.checkpoint(), dir.path / "ckpt.bin");
  const ModelSpec spec = make_model_spec(f.cfg, f.ds.manifest);
  Trainer resumed(f.ds, f.split, tc, load_checkpoint(dir.path / "ckpt.bin", &spec));
  while (!resumed.done()) resumed.run_epoch();
  CHECK(params_bitwise_equal(straight.params(), resumed.params()));
  CHECK(resumed.progress().epochs_done == 6);
  CHECK(resumed.progress().history.size() == 6);
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
  Fixture f;
  Trainer t(f.ds, f.split, make_train_config(f.cfg), make_initial_model(f.cfg, f.ds.manifest));
  t.run_epoch();
  t.run_epoch();
  test_util::TempDir dir;
  save_checkpoint(t.checkpoint(), dir.path / "a.bin");
  save_checkpoint(load_checkpoint(dir.path / "a.bin"), dir.path / "b.bin");
  CHECK(test_util::slurp(dir.path / "a.bin") == test_util::slurp(dir.path / "b.bin"));
  CHECK(test_util::slurp(dir.path / "a.bin.json") == test_util::slurp(dir.path / "b.bin.json"));
}

TEST_CASE("checkpoint with a different layer count is rejected") {
  Fixture f;
  Trainer t(f.ds, f.split, make_train_config(f.cfg), make_initial_model(f.cfg, f.ds.manifest));
  test_util::TempDir dir;
  save_checkpoint(t.checkpoint(), dir.path / "a.bin");
  ModelSpec other = make_model_spec(f.cfg, f.ds.manifest);
  other.layer_dims.pop_back();
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path / "a.bin", &other), doctest::Contains("K"), CheckpointError);
}

TEST_CASE("truncated checkpoint is rejected") {
  Fixture f;
  Trainer t(f.ds, f.split, make_train_config(f.cfg), make_initial_model(f.cfg, f.ds.manifest));
  test_util::TempDir dir;
  save_checkpoint(t.checkpoint(), dir.path / "a.bin");
  std::filesystem::resize_file(dir.path / "a.bin", std::filesystem::file_size(dir.path / "a.bin") - 7);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "a.bin"), CheckpointError);
}

TEST_CASE("a final batch of one trial is skipped and counted") {
  Fixture f;
  // Trim the train list so that it leaves exactly one trial over.
  f.split.train.resize(33);
  TrainConfig tc = make_train_config(f.cfg);
  tc.batch_size = 16;
  Trainer t(f.ds, f.split, tc, make_initial_model(f.cfg, f.ds.manifest));
  const EpochRecord r = t.run_epoch();
  CHECK(r.batches == 2);
  CHECK(r.skipped_batches == 1);
}

TEST_CASE("divergent training aborts with a numeric error") {
  Fixture f;
  TrainConfig tc = make_train_config(f.cfg);
  tc.lr = 1e30;
  Trainer t(f.ds, f.split, tc, make_initial_model(f.cfg, f.ds.manifest));
  CHECK_THROWS_AS(
      [&] {
        while (!t.done()) t.run_epoch();
      }(),
      NumericError);
}

TEST_CASE("early stopping returns the best validation snapshot") {
  Fixture f;
  f.cfg.train.patience = 1;
  f.cfg.train.epochs = 12;
  f.cfg.loss.t_c = 6;
  const TrainResult r = train(f.ds, f.split, make_train_config(f.cfg), make_initial_model(f.cfg, f.ds.manifest));
  const auto& h = r.progress.history;
  REQUIRE_FALSE(h.empty());
  double best = -1;
  int best_epoch = 0;
  for (const auto& rec : h) {
    if (rec.val_top1 && *rec.val_top1 > best) {
      best = *rec.val_top1;
      best_epoch = rec.epoch;
    }
  }
  CHECK(r.progress.best_epoch == best_epoch);
  CHECK(r.progress.best_val_top1 == best);
  if (r.progress.stopped_early) CHECK(r.progress.epochs_done < 12);
}
